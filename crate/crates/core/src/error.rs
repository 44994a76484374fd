use thiserror::Error;

/// Errors raised by the analytic models and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-ergodic chain: {0}")]
    NonErgodic(String),
    #[error("unstable queue: {0}")]
    Unstable(String),
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },
    #[error("model violation: {0}")]
    ModelViolation(String),
    #[error("degenerate conditioning event: {0}")]
    Degenerate(String),
    #[error("evaluation limit reached: {0}")]
    EvaluationLimit(String),
    #[error("state space too large: {0}")]
    TooLarge(String),
    #[error("integration failed: {0}")]
    Integration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
