//! Threshold design for distributed opportunistic access.

use crate::channel::{mixture_quantile, ChannelModel};
use crate::error::{Error, Result};
use crate::evt::{gaussian_constants, norm_constants_mixture};
use crate::numerics::erfc_inv;
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ThresholdMethod {
    AsymptoticMixture,
    ExactMixture,
    RefinedGaussian,
}

impl ThresholdMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            ThresholdMethod::AsymptoticMixture => "asymptotic",
            ThresholdMethod::ExactMixture => "exact",
            ThresholdMethod::RefinedGaussian => "refined",
        }
    }
}

/// A capacity threshold targeting one exceedance per slot on average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdPlan {
    pub u: f64,
    pub k: u64,
    /// Target per-user exceedance probability 1/K.
    pub exceed_prob: f64,
    pub method: ThresholdMethod,
}

/// u = b_K from the mixture normalizing constants.
pub fn threshold_asymptotic(k: u64, model: &ChannelModel) -> Result<ThresholdPlan> {
    let g = norm_constants_mixture(k, model)?;
    Ok(ThresholdPlan { u: g.b, k, exceed_prob: 1.0 / k as f64, method: ThresholdMethod::AsymptoticMixture })
}

/// Solves 1 − H(u) = 1/K exactly.
pub fn threshold_exact(k: u64, model: &ChannelModel) -> Result<ThresholdPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("K = {k} below 2")));
    }
    let target = 1.0 / k as f64;
    let u = mixture_quantile(1.0 - target, model)?;
    Ok(ThresholdPlan { u, k, exceed_prob: target, method: ThresholdMethod::ExactMixture })
}

/// u₁ = μ + √2·σ·erfc⁻¹(2/K) for a single Gaussian population.
pub fn threshold_refined_gaussian(k: u64, mu: f64, sigma: f64) -> Result<ThresholdPlan> {
    if k < 2 || !(sigma > 0.0) {
        return Err(Error::InvalidParameter("need K >= 2 and sigma > 0".into()));
    }
    let u = mu + SQRT_2 * sigma * erfc_inv(2.0 / k as f64);
    Ok(ThresholdPlan { u, k, exceed_prob: 1.0 / k as f64, method: ThresholdMethod::RefinedGaussian })
}

/// Logarithmic expansion of the refined threshold.
pub fn threshold_refined_expanded(k: u64, mu: f64, sigma: f64) -> f64 {
    let l = 2.0 * (k as f64).ln();
    let inner = -2.0 * PI * (2.0 * (1.0 / k as f64).ln() + (2.0 * PI).ln());
    mu + sigma * (l - inner.ln()).sqrt()
}

/// Probability that exactly one of K users exceeds a 1/K threshold.
pub fn utilization_prob(k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let kf = k as f64;
    (1.0 - 1.0 / kf).powf(kf - 1.0)
}

/// Expected capacity of the threshold scheduler with both utilization factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistributedCapacity {
    pub k: u64,
    pub threshold: f64,
    /// u + 1/a_K, the mean capacity of an exceeding user.
    pub conditional_mean: f64,
    /// e⁻¹ (u + 1/a_K).
    pub capacity: f64,
    pub utilization_finite: f64,
    /// K(1/K)(1 − 1/K)^(K−1) (u + 1/a_K).
    pub capacity_finite: f64,
}

pub fn expected_capacity_distributed(k: u64, model: &ChannelModel) -> Result<DistributedCapacity> {
    let g = norm_constants_mixture(k, model)?;
    let u = g.b;
    let cond = u + 1.0 / g.a;
    let util = utilization_prob(k);
    Ok(DistributedCapacity {
        k,
        threshold: u,
        conditional_mean: cond,
        capacity: (-1.0f64).exp() * cond,
        utilization_finite: util,
        capacity_finite: util * cond,
    })
}

/// Exceedance level u_n(τ) = log(1/τ)/a_n + b_n for n iid N(μ, σ²) draws.
pub fn level_for_rate(tau: f64, n: u64, mu: f64, sigma: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} must be positive")));
    }
    let g = gaussian_constants(n as f64, mu, sigma)?;
    Ok((1.0 / tau).ln() / g.a + g.b)
}

/// Level with n(1 − Φ((u − μ)/σ)) = τ exactly.
pub fn level_for_rate_exact(tau: f64, n: u64, mu: f64, sigma: f64) -> Result<f64> {
    let r = tau / n as f64;
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("tau / n = {r} outside (0, 1)")));
    }
    Ok(mu + SQRT_2 * sigma * erfc_inv(2.0 * r))
}
