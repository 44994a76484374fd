//! Two-state Gilbert-Elliott channel with Gaussian capacity per state.

use crate::error::{Error, Result};
use crate::numerics::{bisect, norm_cdf, norm_pdf, norm_sf};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Per-user channel dynamics and capacity laws.
///
/// `alpha` is the per-slot Good to Bad switching probability and `beta` the
/// Bad to Good one. Capacities are unitless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub alpha: f64,
    pub beta: f64,
    pub mu_g: f64,
    pub sigma_g: f64,
    pub mu_b: f64,
    pub sigma_b: f64,
}

impl ChannelModel {
    pub fn new(alpha: f64, beta: f64, mu_g: f64, sigma_g: f64, mu_b: f64, sigma_b: f64) -> Result<Self> {
        let m = ChannelModel { alpha, beta, mu_g, sigma_g, mu_b, sigma_b };
        m.validate()?;
        Ok(m)
    }

    /// Reference parameters: α = β = 0.1, Good N(√2, 0.5²), Bad N(0, 0.3²).
    pub fn reference() -> Self {
        ChannelModel {
            alpha: 0.1,
            beta: 0.1,
            mu_g: std::f64::consts::SQRT_2,
            sigma_g: 0.5,
            mu_b: 0.0,
            sigma_b: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        if !prob(self.alpha) || !prob(self.beta) {
            return Err(Error::InvalidParameter(format!(
                "alpha={} beta={} must lie in [0, 1]",
                self.alpha, self.beta
            )));
        }
        if self.alpha + self.beta == 0.0 {
            return Err(Error::NonErgodic("alpha = beta = 0".into()));
        }
        if !(self.sigma_g > 0.0 && self.sigma_b > 0.0) {
            return Err(Error::InvalidParameter("standard deviations must be positive".into()));
        }
        if !(self.mu_g.is_finite() && self.mu_b.is_finite()) {
            return Err(Error::InvalidParameter("means must be finite".into()));
        }
        let ordered = self.sigma_g > self.sigma_b || (self.sigma_g == self.sigma_b && self.mu_g > self.mu_b);
        if !ordered {
            return Err(Error::InvalidParameter(
                "good state needs sigma_g > sigma_b, or equal sigmas with mu_g > mu_b".into(),
            ));
        }
        Ok(())
    }

    /// True when the good state has the lower mean, which the asymptotic
    /// formulas tolerate only because its tail is heavier.
    pub fn good_mean_below_bad(&self) -> bool {
        self.mu_g < self.mu_b
    }

    /// Model with the good state only (α = 0).
    pub fn good_only(&self) -> Self {
        ChannelModel { alpha: 0.0, beta: self.beta.max(f64::MIN_POSITIVE), ..*self }
    }

    fn weights(&self) -> (f64, f64) {
        let s = self.alpha + self.beta;
        (self.beta / s, self.alpha / s)
    }

    pub fn params(&self, s: UserState) -> (f64, f64) {
        match s {
            UserState::Good => (self.mu_g, self.sigma_g),
            UserState::Bad => (self.mu_b, self.sigma_b),
        }
    }
}

/// Channel state of one user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UserState {
    Good,
    Bad,
}

/// Stationary probabilities (p, q) of the Good and Bad states.
pub fn stationary_state_probs(model: &ChannelModel) -> Result<(f64, f64)> {
    if model.alpha + model.beta <= 0.0 {
        return Err(Error::NonErgodic("alpha = beta = 0 has no unique stationary law".into()));
    }
    Ok(model.weights())
}

/// Stationary capacity CDF p·Φ_g(t) + q·Φ_b(t).
pub fn mixture_cdf(t: f64, model: &ChannelModel) -> f64 {
    let (p, q) = model.weights();
    p * norm_cdf((t - model.mu_g) / model.sigma_g) + q * norm_cdf((t - model.mu_b) / model.sigma_b)
}

/// Upper tail 1 − H(t), evaluated without cancellation.
pub fn mixture_sf(t: f64, model: &ChannelModel) -> f64 {
    let (p, q) = model.weights();
    p * norm_sf((t - model.mu_g) / model.sigma_g) + q * norm_sf((t - model.mu_b) / model.sigma_b)
}

pub fn mixture_pdf(t: f64, model: &ChannelModel) -> f64 {
    let (p, q) = model.weights();
    p * norm_pdf((t - model.mu_g) / model.sigma_g) / model.sigma_g
        + q * norm_pdf((t - model.mu_b) / model.sigma_b) / model.sigma_b
}

/// Inverse of [`mixture_cdf`] by bracketing and bisection.
pub fn mixture_quantile(prob: f64, model: &ChannelModel) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!("probability {prob} outside (0, 1)")));
    }
    let mut lo = (model.mu_g - model.sigma_g).min(model.mu_b - model.sigma_b);
    let mut hi = (model.mu_g + model.sigma_g).max(model.mu_b + model.sigma_b);
    let width = model.sigma_g.max(model.sigma_b);
    while mixture_cdf(lo, model) > prob {
        lo -= width;
    }
    while mixture_cdf(hi, model) < prob && mixture_sf(hi, model) > 1.0 - prob {
        hi += width;
    }
    let xtol = 1e-15 * lo.abs().max(hi.abs()).max(1.0);
    if prob > 0.5 {
        let target = 1.0 - prob;
        bisect(|t| mixture_sf(t, model) - target, lo, hi, xtol)
    } else {
        bisect(|t| mixture_cdf(t, model) - prob, lo, hi, xtol)
    }
}

/// One slot of the Good/Bad Markov chain.
pub fn step_state<R: Rng + ?Sized>(s: UserState, model: &ChannelModel, rng: &mut R) -> UserState {
    let u: f64 = rng.random();
    match s {
        UserState::Good if u < model.alpha => UserState::Bad,
        UserState::Bad if u < model.beta => UserState::Good,
        other => other,
    }
}

/// Draw a state from the stationary law.
pub fn sample_stationary_state<R: Rng + ?Sized>(model: &ChannelModel, rng: &mut R) -> UserState {
    let (p, _) = model.weights();
    if rng.random::<f64>() < p {
        UserState::Good
    } else {
        UserState::Bad
    }
}

/// Gaussian capacity draw for the given state.
pub fn sample_capacity<R: Rng + ?Sized>(s: UserState, model: &ChannelModel, rng: &mut R) -> f64 {
    let (mu, sigma) = model.params(s);
    let z: f64 = rng.sample(StandardNormal);
    mu + sigma * z
}
