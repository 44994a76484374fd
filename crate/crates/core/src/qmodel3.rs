//! Approximate model III: a queue whose service rate is modulated by the
//! user's Good/Bad channel state.

use crate::error::{Error, Result};
use serde::Serialize;

/// Rates of the modulated queue; `mu_*_eff` already include the success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TDQueueParams {
    pub lambda: f64,
    pub mu_g_eff: f64,
    pub mu_b_eff: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu_g: f64,
    pub mu_b: f64,
}

impl TDQueueParams {
    pub fn new(lambda: f64, mu_g: f64, mu_b: f64, alpha: f64, beta: f64, p_succ: f64) -> Self {
        TDQueueParams {
            lambda,
            mu_g_eff: mu_g * p_succ,
            mu_b_eff: mu_b * p_succ,
            alpha,
            beta,
            mu_g,
            mu_b,
        }
    }

    /// Stationary channel-state probabilities (π_g, π_b).
    pub fn state_probs(&self) -> (f64, f64) {
        let s = self.alpha + self.beta;
        (self.beta / s, self.alpha / s)
    }

    /// Average service rate μ̂.
    pub fn mu_hat(&self) -> f64 {
        let (pg, pb) = self.state_probs();
        pg * self.mu_g_eff + pb * self.mu_b_eff
    }

    fn validate(&self) -> Result<()> {
        let rates = [self.lambda, self.mu_g_eff, self.mu_b_eff, self.alpha, self.beta, self.mu_g, self.mu_b];
        if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) || self.alpha + self.beta == 0.0 {
            return Err(Error::InvalidParameter("rates must be finite and nonnegative, alpha + beta > 0".into()));
        }
        if !(self.mu_g_eff > 0.0 && self.mu_b_eff > 0.0) {
            return Err(Error::InvalidParameter("service rates must be positive".into()));
        }
        if !(self.mu_hat() > self.lambda) {
            return Err(Error::Unstable(format!(
                "average service rate {} does not exceed lambda = {}",
                self.mu_hat(),
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Coefficients (c3, c2, c1, c0) of g(z).
pub fn cubic_coeffs(p: &TDQueueParams) -> [f64; 4] {
    let (l, a, b, g, bb) = (p.lambda, p.alpha, p.beta, p.mu_g_eff, p.mu_b_eff);
    [
        l * l,
        -(a * l + b * l + l * l + l * bb + l * g),
        a * bb + b * g + g * bb + l * bb + l * g,
        -g * bb,
    ]
}

pub fn cubic_eval(c: &[f64; 4], z: f64) -> f64 {
    ((c[0] * z + c[1]) * z + c[2]) * z + c[3]
}

fn cubic_deriv(c: &[f64; 4], z: f64) -> f64 {
    (3.0 * c[0] * z + 2.0 * c[1]) * z + c[2]
}

/// Real roots of g, Newton-polished.
pub fn real_roots(p: &TDQueueParams) -> Vec<f64> {
    let c = cubic_coeffs(p);
    let raw = roots::find_roots_cubic(c[0], c[1], c[2], c[3]);
    raw.as_ref()
        .iter()
        .map(|&z0| {
            let mut z = z0;
            for _ in 0..4 {
                let d = cubic_deriv(&c, z);
                if d == 0.0 {
                    break;
                }
                let step = cubic_eval(&c, z) / d;
                if !step.is_finite() {
                    break;
                }
                z -= step;
            }
            z
        })
        .collect()
}

fn empty_at(p: &TDQueueParams, z0: f64) -> (f64, f64) {
    let (l, g, b) = (p.lambda, p.mu_g_eff, p.mu_b_eff);
    let k = (p.mu_hat() - l) * z0 / (1.0 - z0);
    (p.beta * k / (g * (b - l * z0)), p.alpha * k / (b * (g - l * z0)))
}

fn gf_at(p: &TDQueueParams, pi0: (f64, f64), z: f64) -> (f64, f64, f64) {
    let c = cubic_coeffs(p);
    let gz = cubic_eval(&c, z);
    let (l, g, b, mh) = (p.lambda, p.mu_g_eff, p.mu_b_eff, p.mu_hat());
    let ng = p.beta * (mh - l) * z + pi0.0 * g * (1.0 - z) * (l * z - b);
    let nb = p.alpha * (mh - l) * z + pi0.1 * b * (1.0 - z) * (l * z - g);
    (ng / gz, nb / gz, gz)
}

fn admissible(p: &TDQueueParams, z0: f64) -> bool {
    if !(z0 > 0.0 && z0 < 1.0) {
        return false;
    }
    let (pg, pb) = p.state_probs();
    let (g0, b0) = empty_at(p, z0);
    let tol = 1e-12;
    if !(g0 >= -tol && g0 <= pg + tol && b0 >= -tol && b0 <= pb + tol) {
        return false;
    }
    (0..=200).map(|i| i as f64 / 200.0).filter(|z| (z - z0).abs() > 1e-3).all(|z| {
        let (gg, gb, _) = gf_at(p, (g0, b0), z);
        gg >= -1e-9 && gb >= -1e-9
    })
}

/// The unique admissible root of g in (0, 1).
pub fn solve_z0(p: &TDQueueParams) -> Result<f64> {
    p.validate()?;
    let roots = real_roots(p);
    let ok: Vec<f64> = roots.iter().copied().filter(|&z| admissible(p, z)).collect();
    match ok.as_slice() {
        [z] => Ok(*z),
        _ => Err(Error::ModelViolation(format!(
            "{} admissible roots among real roots {:?}",
            ok.len(),
            roots
        ))),
    }
}

/// Empty-queue probabilities (π^g₀, π^b₀).
pub fn empty_probs(p: &TDQueueParams, z0: f64) -> Result<(f64, f64)> {
    let l = p.lambda;
    let singular = |x: f64| x.abs() < 1e-300;
    if singular(1.0 - z0) || singular(p.mu_b_eff - l * z0) || singular(p.mu_g_eff - l * z0) {
        return Err(Error::ModelViolation(format!("singular empty-probability denominator at z0 = {z0}")));
    }
    Ok(empty_at(p, z0))
}

/// Partial generating functions (G_g(z), G_b(z)).
pub fn partial_gf(p: &TDQueueParams, z0: f64, z: f64) -> Result<(f64, f64)> {
    let pi0 = empty_probs(p, z0)?;
    let (gg, gb, gz) = gf_at(p, pi0, z);
    if gz.abs() < 1e-14 * cubic_coeffs(p).iter().map(|c| c.abs()).fold(0.0, f64::max) {
        return Err(Error::ModelViolation(format!("g has a zero at z = {z}")));
    }
    Ok((gg, gb))
}

/// Mean number in system including the packet in service.
pub fn mean_queue(p: &TDQueueParams, z0: f64) -> Result<f64> {
    let (g0, b0) = empty_probs(p, z0)?;
    let (l, g, b, mh) = (p.lambda, p.mu_g_eff, p.mu_b_eff, p.mu_hat());
    Ok(l / (mh - l) + (g * (b - l) * g0 + b * (g - l) * b0 - (g - l) * (b - l)) / ((p.alpha + p.beta) * (mh - l)))
}

/// W = Q̄/λ, absent when λ = 0.
pub fn waiting_time(p: &TDQueueParams, z0: f64) -> Result<Option<f64>> {
    let q = mean_queue(p, z0)?;
    Ok(if p.lambda > 0.0 { Some(q / p.lambda) } else { None })
}

/// Per-slot probability of attempting with a nonempty queue.
pub fn attempt_prob(p: &TDQueueParams, z0: f64) -> Result<f64> {
    let (pg, pb) = p.state_probs();
    let (g0, b0) = empty_probs(p, z0)?;
    Ok((pg - g0) * (1.0 - (-p.mu_g).exp()) + (pb - b0) * (1.0 - (-p.mu_b).exp()))
}

/// Queue-length probabilities per channel state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateQueueDist {
    pub pi_g: Vec<f64>,
    pub pi_b: Vec<f64>,
    /// 1 − Σ (π^g_m + π^b_m) over the computed range.
    pub tail_mass: f64,
}

impl StateQueueDist {
    pub fn mean(&self) -> f64 {
        self.pi_g.iter().zip(&self.pi_b).enumerate().map(|(m, (a, b))| m as f64 * (a + b)).sum()
    }
}

#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Queue-length probabilities π^g_m, π^b_m, extended past `m_max` until the tail mass is below 1e-6.
///
/// The displayed forward recursion amplifies rounding errors geometrically, so when the
/// two roots of g other than z₀ are real and distinct the coefficients are read off the
/// partial-fraction expansion of the generating functions instead. The forward recursion
/// (with compensated partial sums) remains as a fallback.
pub fn steady_recursion(p: &TDQueueParams, z0: f64, m_max: usize) -> Result<StateQueueDist> {
    let pi0 = empty_probs(p, z0)?;
    if p.lambda == 0.0 {
        return Ok(StateQueueDist { pi_g: vec![pi0.0], pi_b: vec![pi0.1], tail_mass: 1.0 - pi0.0 - pi0.1 });
    }
    match spectral_terms(p, z0, pi0) {
        Some(terms) => collect_terms(pi0, m_max, |m| {
            let t = |(a, b, z): (f64, f64, f64)| (a * z.powi(-(m as i32) - 1), b * z.powi(-(m as i32) - 1));
            let (x, y) = (t(terms[0]), t(terms[1]));
            (x.0 + y.0, x.1 + y.1)
        }),
        None => forward_recursion(p, pi0, m_max),
    }
}

/// Residues (A_g, A_b, z_i) of G(z) = Σ_i A_i / (z_i − z) at the two remaining poles.
fn spectral_terms(p: &TDQueueParams, z0: f64, pi0: (f64, f64)) -> Option<[(f64, f64, f64); 2]> {
    let others: Vec<f64> = real_roots(p).into_iter().filter(|z| (z - z0).abs() > 1e-9).collect();
    let [z1, z2] = others[..] else { return None };
    if !(z1.abs() > 1.0 && z2.abs() > 1.0) || (z1 - z2).abs() < 1e-6 * z1.abs() {
        return None;
    }
    let (l, g, b, mh) = (p.lambda, p.mu_g_eff, p.mu_b_eff, p.mu_hat());
    // numerators N(z) = n2 z² + n1 z + n0 share the factor (z − z0) with g(z)
    let reduced = |coef: f64, pi: f64, own: f64, other: f64| {
        let n2 = -pi * own * l;
        let n1 = coef * (mh - l) + pi * own * (l + other);
        move |z: f64| n2 * z + n1 + n2 * z0
    };
    let lg = reduced(p.beta, pi0.0, g, b);
    let lb = reduced(p.alpha, pi0.1, b, g);
    let res = |zi: f64, zj: f64| {
        let d = l * l * (zi - zj);
        (-lg(zi) / d, -lb(zi) / d, zi)
    };
    Some([res(z1, z2), res(z2, z1)])
}

fn collect_terms<F: FnMut(usize) -> (f64, f64)>(pi0: (f64, f64), m_max: usize, mut term: F) -> Result<StateQueueDist> {
    let mut pi_g = vec![pi0.0];
    let mut pi_b = vec![pi0.1];
    let mut total = Neumaier::default();
    total.add(pi0.0 + pi0.1);
    let hard_cap = m_max.max(1).saturating_mul(64).max(1 << 16);
    for m in 1.. {
        let (ng, nb) = term(m);
        if ng < -1e-9 || nb < -1e-9 {
            return Err(Error::ModelViolation(format!(
                "negative probability at m = {m} (pi_g = {ng:e}, pi_b = {nb:e})"
            )));
        }
        let (ng, nb) = (ng.max(0.0), nb.max(0.0));
        pi_g.push(ng);
        pi_b.push(nb);
        total.add(ng + nb);
        let tail = 1.0 - total.value();
        if m >= m_max && tail < 1e-6 {
            return Ok(StateQueueDist { pi_g, pi_b, tail_mass: tail });
        }
        if m >= hard_cap {
            return Err(Error::ModelViolation(format!("tail mass {tail:e} after {m} terms")));
        }
    }
    unreachable!()
}

fn forward_recursion(p: &TDQueueParams, pi0: (f64, f64), m_max: usize) -> Result<StateQueueDist> {
    let (l, g, b) = (p.lambda, p.mu_g_eff, p.mu_b_eff);
    let (mut sg, mut sb) = (Neumaier::default(), Neumaier::default());
    sg.add(pi0.0);
    sb.add(pi0.1);
    let mut last = pi0;
    collect_terms(pi0, m_max, move |_| {
        let ng = last.0 * l / g + sg.value() * p.alpha / g - sb.value() * p.beta / g;
        let nb = last.1 * l / b + sb.value() * p.beta / b - sg.value() * p.alpha / b;
        sg.add(ng);
        sb.add(nb);
        last = (ng, nb);
        (ng, nb)
    })
}

/// Coupled steady state of model III.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TDQueueSteady {
    pub z0: f64,
    pub pi_g0: f64,
    pub pi_b0: f64,
    pub p_succ: f64,
    pub attempt_prob: f64,
    pub mean_queue: f64,
    pub wait: Option<f64>,
    pub iterations: usize,
}

/// Solves p_succ = (1 − P_t)^(K−1) jointly with the cubic root, damping updates by 0.5.
///
/// All rates are per user.
pub fn solve_model3(k: u64, lambda: f64, mu_g: f64, mu_b: f64, alpha: f64, beta: f64, tol: f64) -> Result<TDQueueSteady> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    TDQueueParams::new(lambda, mu_g, mu_b, alpha, beta, 1.0).validate()?;
    let mut ps = 1.0;
    let mut trace = Vec::new();
    let max_iter = 10_000;
    for it in 0..max_iter {
        let p = TDQueueParams::new(lambda, mu_g, mu_b, alpha, beta, ps);
        let z0 = solve_z0(&p).map_err(|e| match e {
            Error::Unstable(msg) => Error::Unstable(format!("{msg} at p_succ = {ps} (trace {trace:?})")),
            other => other,
        })?;
        let pt = attempt_prob(&p, z0)?;
        let next = (1.0 - pt).powf((k - 1) as f64);
        let r = (next - ps).abs();
        trace.push(r);
        if r < tol {
            let (pi_g0, pi_b0) = empty_probs(&p, z0)?;
            return Ok(TDQueueSteady {
                z0,
                pi_g0,
                pi_b0,
                p_succ: ps,
                attempt_prob: pt,
                mean_queue: mean_queue(&p, z0)?,
                wait: waiting_time(&p, z0)?,
                iterations: it + 1,
            });
        }
        ps = 0.5 * ps + 0.5 * next;
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: *trace.last().unwrap_or(&f64::NAN), trace })
}

/// Symmetric system: total rates are split equally over K users.
pub fn solve_model3_symmetric(
    k: u64,
    lambda_t: f64,
    mu_g_total: f64,
    mu_b_total: f64,
    alpha: f64,
    beta: f64,
    tol: f64,
) -> Result<TDQueueSteady> {
    let kf = k as f64;
    solve_model3(k, lambda_t / kf, mu_g_total / kf, mu_b_total / kf, alpha, beta, tol)
}
