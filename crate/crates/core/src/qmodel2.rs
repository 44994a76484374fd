//! Approximate model II: independent queues with a constant collision probability.

use crate::error::{Error, Result};
use crate::numerics::bisect;
use crate::solution::QModelSolution;
use serde::Serialize;

/// A single queue decoupled from the others through `p_coll`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoupledQueue {
    pub lambda: f64,
    pub tau: f64,
    pub p_coll: f64,
    pub k: Option<u64>,
}

/// Collision probability when every user is backlogged: 1 − (1 − 1/K)^(K−1).
pub fn p_coll_backlogged(k: u64) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    let kf = k as f64;
    1.0 - (1.0 - 1.0 / kf).powf(kf - 1.0)
}

/// Right-hand side of the collision fixed point.
pub fn p_coll_map(p: f64, lambda: f64, tau: f64, k: Option<u64>) -> f64 {
    let x = lambda / ((1.0 - p) * tau);
    match k {
        None => 1.0 - (-x).exp(),
        Some(k) => {
            let kf = k as f64;
            1.0 - (1.0 - x / kf).powf(kf - 1.0)
        }
    }
}

/// Smallest stable fixed point of p = map(p) on [0, 1 − λ/τ).
pub fn solve_p_coll(lambda: f64, tau: f64, k: Option<u64>) -> Result<f64> {
    if !(lambda >= 0.0) || !(tau > 0.0) {
        return Err(Error::InvalidParameter("need lambda >= 0 and tau > 0".into()));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let upper = 1.0 - lambda / tau;
    if !(upper > 0.0) {
        return Err(Error::Unstable(format!("lambda = {lambda} is not below tau = {tau}")));
    }
    let f = |p: f64| p - p_coll_map(p, lambda, tau, k);
    let n = 4096;
    let mut lo = 0.0;
    let mut flo = f(lo);
    for i in 1..=n {
        let hi = upper * i as f64 / n as f64 * (1.0 - 1e-12);
        let fhi = f(hi);
        if flo <= 0.0 && fhi >= 0.0 {
            let root = bisect(f, lo, hi, 0.0)?;
            return Ok(root);
        }
        lo = hi;
        flo = fhi;
    }
    Err(Error::Unstable(format!(
        "no stable collision probability for lambda = {lambda}, tau = {tau}"
    )))
}

/// Probability of an empty queue 1 − λ/((1 − p_coll)τ).
pub fn empty_prob(lambda: f64, tau: f64, p_coll: f64) -> Result<f64> {
    let mu = (1.0 - p_coll) * tau;
    if !(lambda < mu) {
        return Err(Error::Unstable(format!("lambda = {lambda} >= service rate {mu}")));
    }
    Ok(1.0 - lambda / mu)
}

/// Single-queue metrics with effective service rate (1 − p_coll)τ.
pub fn metrics_model2(q: &DecoupledQueue) -> Result<QModelSolution> {
    let mu = (1.0 - q.p_coll) * q.tau;
    if !(q.lambda < mu) || !(0.0..1.0).contains(&q.p_coll) {
        return Err(Error::Unstable(format!("lambda = {} >= service rate {mu}", q.lambda)));
    }
    let rho = q.lambda / mu;
    let service = 1.0 / mu;
    let wait = rho / (mu - q.lambda);
    Ok(QModelSolution {
        success_prob: Some(1.0 - q.p_coll),
        mean_queue: rho / (1.0 - rho),
        time_in_line: Some(wait),
        service_time: Some(service),
        delay: Some(wait + service),
    })
}

/// Solves the symmetric system with total arrival rate `lambda_t` and τ = 1/K.
pub fn solve_symmetric(k: u64, lambda_t: f64) -> Result<DecoupledQueue> {
    let tau = 1.0 / k as f64;
    let lambda = lambda_t / k as f64;
    let p_coll = solve_p_coll(lambda, tau, Some(k))?;
    Ok(DecoupledQueue { lambda, tau, p_coll, k: Some(k) })
}
