//! Shared inputs for the benchmarks.

use gemac_core::sim::{Arrivals, AttemptRule, SimConfig};
use gemac_core::ChannelModel;

/// Slotted ALOHA population with attempt probability 1/K and total load `lambda_t`.
pub fn aloha(k: usize, lambda_t: f64, horizon: u64) -> SimConfig {
    SimConfig::new(
        k,
        ChannelModel::reference(),
        AttemptRule::Probability(1.0 / k as f64),
        Arrivals::BernoulliPerSlot(lambda_t / k as f64),
    )
    .with_horizon(horizon)
    .with_seed(1)
}
