//! Gumbel normalizing constants and expected maximum capacity.

use crate::channel::{mixture_pdf, mixture_sf, stationary_state_probs, ChannelModel};
use crate::error::{Error, Result};
use crate::numerics::EULER_GAMMA;
use serde::Serialize;
use std::f64::consts::PI;

/// Normalizing constants of the maximum: P(M ≤ t) ≈ exp(−exp(−a(t − b))).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GumbelNorm {
    /// Inverse scale, in 1/capacity units.
    pub a: f64,
    /// Location.
    pub b: f64,
    /// Population size (fractional for effective sizes such as p·K).
    pub k: f64,
}

/// Textbook constants for the maximum of `n` iid N(mu, sigma²) draws.
pub fn gaussian_constants(n: f64, mu: f64, sigma: f64) -> Result<GumbelNorm> {
    constants(n, mu, sigma, 1.0)
}

fn constants(n: f64, mu: f64, sigma: f64, p: f64) -> Result<GumbelNorm> {
    if !(n >= 3.0) {
        return Err(Error::InvalidParameter(format!("population size {n} below 3")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter("sigma must be positive".into()));
    }
    if !(p > 0.0) {
        return Err(Error::InvalidParameter("good-state probability is zero".into()));
    }
    let l = (2.0 * n.ln()).sqrt();
    let a = l / sigma;
    let b = sigma * (l - (n.ln().ln() + (4.0 * PI / (p * p)).ln()) / (2.0 * l)) + mu;
    Ok(GumbelNorm { a, b, k: n })
}

/// Constants for the maximum of K stationary mixture draws.
pub fn norm_constants_mixture(k: u64, model: &ChannelModel) -> Result<GumbelNorm> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("K = {k} below 3")));
    }
    let (p, _) = stationary_state_probs(model)?;
    constants(k as f64, model.mu_g, model.sigma_g, p)
}

/// Centralized expected capacity b_K + γ/a_K.
pub fn expected_capacity_centralized(k: u64, model: &ChannelModel) -> Result<f64> {
    Ok(gumbel_mean(&norm_constants_mixture(k, model)?))
}

/// Expected maximum when only the p·K good users are eligible.
pub fn expected_capacity_good_only(k: u64, model: &ChannelModel) -> Result<f64> {
    let (p, _) = stationary_state_probs(model)?;
    let n = p * k as f64;
    if n < 3.0 {
        return Err(Error::InvalidParameter(format!("effective good population {n} below 3")));
    }
    Ok(gumbel_mean(&gaussian_constants(n, model.mu_g, model.sigma_g)?))
}

pub fn gumbel_cdf(x: f64, norm: &GumbelNorm) -> f64 {
    (-(-norm.a * (x - norm.b)).exp()).exp()
}

pub fn gumbel_pdf(x: f64, norm: &GumbelNorm) -> f64 {
    let e = (-norm.a * (x - norm.b)).exp();
    norm.a * e * (-e).exp()
}

pub fn gumbel_mean(norm: &GumbelNorm) -> f64 {
    norm.b + EULER_GAMMA / norm.a
}

/// Reciprocal hazard (1 − H(t)) / h(t) of the stationary mixture.
pub fn reciprocal_hazard(t: f64, model: &ChannelModel) -> Result<f64> {
    let f = mixture_pdf(t, model);
    if f < 1e-300 {
        return Err(Error::EvaluationLimit(format!("mixture density underflows at t = {t}")));
    }
    Ok(mixture_sf(t, model) / f)
}
