//! Group-size Markov chain of K users and the capacity it implies.

use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::evt::{gaussian_constants, gumbel_cdf, gumbel_mean, gumbel_pdf, GumbelNorm};
use crate::numerics::{integrate, ln_binomial, norm_cdf, norm_pdf, xlogx};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

/// Default group size above which a group maximum uses the Gumbel law.
pub const DEFAULT_PHI: usize = 30;

const DENSE_LIMIT: usize = 2000;

/// Chain over i = number of users in the Bad state, i = 0..=K.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemChain {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Row-major (K+1)×(K+1) transition matrix.
    pub p: Vec<f64>,
    /// Stationary vector, absent when the chain has no unique one.
    pub pi: Option<Vec<f64>>,
}

impl SystemChain {
    pub fn n(&self) -> usize {
        self.k + 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.p[i * self.n()..(i + 1) * self.n()]
    }
}

/// Number of summands in the binomial sum for entry (i, j).
pub fn summand_count(k: usize, i: usize, j: usize) -> usize {
    i.min(k - i).min(j).min(k - j) + 1
}

fn entry(k: usize, i: usize, j: usize, alpha: f64, beta: f64) -> f64 {
    let (la, l1a, lb, l1b) = (alpha, 1.0 - alpha, beta, 1.0 - beta);
    let m = i.min(k - i).min(j).min(k - j);
    let (ku, iu) = (k as u64, i as u64);
    let mut s = 0.0;
    for n in 0..=m {
        let nf = n as f64;
        let ln_term = if i <= j {
            let up = j - i + n;
            ln_binomial(ku - iu, up as u64)
                + ln_binomial(iu, n as u64)
                + xlogx(up as f64, la)
                + xlogx((k - j - n) as f64, l1a)
                + xlogx(nf, lb)
                + xlogx((i - n) as f64, l1b)
        } else {
            let down = i - j + n;
            ln_binomial(ku - iu, n as u64)
                + ln_binomial(iu, down as u64)
                + xlogx(nf, la)
                + xlogx((k - i - n) as f64, l1a)
                + xlogx(down as f64, lb)
                + xlogx((j - n) as f64, l1b)
        };
        s += ln_term.exp();
    }
    s
}

/// Builds the (K+1)-state transition matrix and, when unique, its stationary vector.
pub fn transition_matrix(k: usize, alpha: f64, beta: f64) -> Result<SystemChain> {
    if k < 1 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter("alpha and beta must lie in [0, 1]".into()));
    }
    let n = k + 1;
    let p: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|idx| entry(k, idx / n, idx % n, alpha, beta))
        .collect();
    let mut chain = SystemChain { k, alpha, beta, p, pi: None };
    chain.pi = stationary_chain(&chain).ok();
    Ok(chain)
}

/// Stationary vector of the chain.
pub fn stationary_chain(chain: &SystemChain) -> Result<Vec<f64>> {
    if chain.alpha + chain.beta == 0.0 {
        return Err(Error::NonErgodic("alpha = beta = 0 gives the identity matrix".into()));
    }
    let n = chain.n();
    let pi = if n <= DENSE_LIMIT + 1 { dense_stationary(chain)? } else { power_stationary(chain)? };
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let s: f64 = (0..n).map(|i| pi[i] * chain.get(i, j)).sum();
        worst = worst.max((s - pi[j]).abs());
    }
    if worst > 1e-10 || pi.iter().any(|&x| x < -1e-12) {
        return Err(Error::NonErgodic(format!("no unique stationary vector (balance residual {worst:e})")));
    }
    Ok(pi.into_iter().map(|x| x.max(0.0)).collect())
}

fn dense_stationary(chain: &SystemChain) -> Result<Vec<f64>> {
    let n = chain.n();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(j, i)] = chain.get(i, j) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NonErgodic("singular balance equations".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonErgodic("singular balance equations".into()));
    }
    Ok(x.iter().copied().collect())
}

fn power_stationary(chain: &SystemChain) -> Result<Vec<f64>> {
    let n = chain.n();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let next: Vec<f64> = (0..n).map(|j| (0..n).map(|i| pi[i] * chain.get(i, j)).sum()).collect();
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-14 {
            return Ok(pi);
        }
    }
    Err(Error::NoConvergence { iterations: 100_000, residual: f64::NAN, trace: vec![] })
}

/// CDF and density of one group's maximum.
#[derive(Debug, Clone, Copy)]
enum GroupMax {
    Empty,
    Exact { k: i32, mu: f64, sigma: f64 },
    Gumbel(GumbelNorm),
}

impl GroupMax {
    fn new(k: usize, mu: f64, sigma: f64, phi: usize) -> Result<Self> {
        Ok(if k == 0 {
            GroupMax::Empty
        } else if k <= phi {
            GroupMax::Exact { k: k as i32, mu, sigma }
        } else {
            GroupMax::Gumbel(gaussian_constants(k as f64, mu, sigma)?)
        })
    }

    fn cdf(&self, x: f64) -> f64 {
        match *self {
            GroupMax::Empty => 1.0,
            GroupMax::Exact { k, mu, sigma } => norm_cdf((x - mu) / sigma).powi(k),
            GroupMax::Gumbel(g) => gumbel_cdf(x, &g),
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match *self {
            GroupMax::Empty => 0.0,
            GroupMax::Exact { k, mu, sigma } => {
                let z = (x - mu) / sigma;
                k as f64 * norm_cdf(z).powi(k - 1) * norm_pdf(z) / sigma
            }
            GroupMax::Gumbel(g) => gumbel_pdf(x, &g),
        }
    }

    fn support(&self) -> Option<(f64, f64)> {
        match *self {
            GroupMax::Empty => None,
            GroupMax::Exact { mu, sigma, .. } => Some((mu - 10.0 * sigma, mu + 10.0 * sigma)),
            GroupMax::Gumbel(g) => Some((g.b - 4.0 / g.a, g.b + 12.0 / g.a)),
        }
    }
}

fn groups(k_bad: usize, k_good: usize, model: &ChannelModel, phi: usize) -> Result<(GroupMax, GroupMax)> {
    if phi < 3 {
        return Err(Error::InvalidParameter(format!("phi = {phi} below 3")));
    }
    if k_bad + k_good == 0 {
        return Err(Error::InvalidParameter("both groups empty".into()));
    }
    Ok((
        GroupMax::new(k_bad, model.mu_b, model.sigma_b, phi)?,
        GroupMax::new(k_good, model.mu_g, model.sigma_g, phi)?,
    ))
}

/// P(max ≤ x) for independent bad and good groups of the given sizes.
pub fn two_group_max_cdf(x: f64, k_bad: usize, k_good: usize, model: &ChannelModel, phi: usize) -> Result<f64> {
    let (b, g) = groups(k_bad, k_good, model, phi)?;
    Ok(b.cdf(x) * g.cdf(x))
}

/// Density of the two-group maximum, by the product rule.
pub fn two_group_max_pdf(x: f64, k_bad: usize, k_good: usize, model: &ChannelModel, phi: usize) -> Result<f64> {
    let (b, g) = groups(k_bad, k_good, model, phi)?;
    Ok(b.pdf(x) * g.cdf(x) + b.cdf(x) * g.pdf(x))
}

/// E[max] given the group sizes.
pub fn conditional_expected_max(k_bad: usize, k_good: usize, model: &ChannelModel, phi: usize) -> Result<f64> {
    let (b, g) = groups(k_bad, k_good, model, phi)?;
    let mut lo = model.mu_b - 10.0 * model.sigma_b;
    let mut hi = model.mu_g + 10.0 * model.sigma_g;
    for (l, h) in [b.support(), g.support()].into_iter().flatten() {
        lo = lo.min(l);
        hi = hi.max(h);
    }
    let density = |x: f64| b.pdf(x) * g.cdf(x) + b.cdf(x) * g.pdf(x);
    integrate(|x| x * density(x), lo, hi, 1e-8, 64)
}

/// Stationary-weighted expected maximum capacity over group configurations.
pub fn expected_capacity_by_state(k: usize, model: &ChannelModel, phi: usize) -> Result<f64> {
    let chain = transition_matrix(k, model.alpha, model.beta)?;
    let pi = stationary_chain(&chain)?;
    let terms: Vec<Result<f64>> = (0..=k)
        .into_par_iter()
        .map(|i| {
            if pi[i] == 0.0 {
                Ok(0.0)
            } else {
                conditional_expected_max(i, k - i, model, phi).map(|e| e * pi[i])
            }
        })
        .collect();
    let mut total = 0.0;
    for t in terms {
        total += t?;
    }
    Ok(total)
}

fn symmetric_case(k: usize, model: &ChannelModel, min_half: usize, delta: usize) -> Result<Vec<f64>> {
    if k % 2 != 0 || model.alpha != model.beta {
        return Err(Error::InvalidParameter(
            "mode bounds are defined only for even K in the symmetric case alpha == beta".into(),
        ));
    }
    if k / 2 < delta + min_half {
        return Err(Error::InvalidParameter(format!("K/2 - delta must be at least {min_half}")));
    }
    let chain = transition_matrix(k, model.alpha, model.beta)?;
    stationary_chain(&chain)
}

fn good_group_mean(n: usize, model: &ChannelModel) -> Result<f64> {
    Ok(gumbel_mean(&gaussian_constants(n as f64, model.mu_g, model.sigma_g)?))
}

/// Lower bound 2·π_{K/2}·E_Gumbel[max of K/2 good users].
pub fn capacity_lower_bound_mode(k: usize, model: &ChannelModel) -> Result<f64> {
    let pi = symmetric_case(k, model, 3, 0)?;
    Ok(2.0 * pi[k / 2] * good_group_mean(k / 2, model)?)
}

/// Bound that keeps the states K/2−δ..=K/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaBound {
    pub delta: usize,
    /// Σ_{i=K/2−δ}^{K/2} π_i·E_Gumbel[max of i good users].
    pub sum: f64,
    /// δ·π_{K/2−δ}·E_Gumbel[max of K/2−δ good users].
    pub last: f64,
}

pub fn capacity_lower_bound_delta(k: usize, model: &ChannelModel, delta: usize) -> Result<DeltaBound> {
    let pi = symmetric_case(k, model, 3, delta)?;
    let lo = k / 2 - delta;
    let mut sum = 0.0;
    for (i, &w) in pi.iter().enumerate().take(k / 2 + 1).skip(lo) {
        sum += w * good_group_mean(i, model)?;
    }
    let last = good_group_mean(lo, model)? * pi[lo] * delta as f64;
    Ok(DeltaBound { delta, sum, last })
}
