use serde::Serialize;

/// Steady-state performance of one queue under an analytic model.
///
/// Fields that need a positive arrival rate are `None` when λ = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QModelSolution {
    pub success_prob: Option<f64>,
    pub mean_queue: f64,
    pub time_in_line: Option<f64>,
    pub service_time: Option<f64>,
    pub delay: Option<f64>,
}
