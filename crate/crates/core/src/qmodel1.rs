//! Approximate model I: coupled system-status and queue-length chains under
//! delayed first transmission with Bernoulli arrivals.

use crate::error::{Error, Result};
use crate::solution::QModelSolution;
use serde::Serialize;

/// Largest population handled; the status chain has 2^(K−1)(K+2) states.
pub const K_MAX: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Status {
    Idle = 0,
    Active = 1,
    Blocked = 2,
}

/// Status of every user; at most one entry is `Active`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct StatusVector(pub Vec<Status>);

impl StatusVector {
    pub fn is_valid(&self) -> bool {
        self.0.iter().filter(|s| **s == Status::Active).count() <= 1
    }

    fn compact(&self) -> Compact {
        let mut blocked = 0u32;
        let mut active = None;
        for (i, s) in self.0.iter().enumerate() {
            match s {
                Status::Blocked => blocked |= 1 << i,
                Status::Active => active = Some(i),
                Status::Idle => {}
            }
        }
        Compact { blocked, active }
    }
}

/// Per-user arrival probability and per-slot attempt probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserParams {
    pub lambda: f64,
    pub p: f64,
}

impl UserParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda) || !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= lambda < 1 and 0 < p < 1, got lambda={} p={}",
                self.lambda, self.p
            )));
        }
        Ok(())
    }
}

/// Symmetric population with total arrival rate `lambda_t` and attempt probability 1/K.
pub fn symmetric_params(k: usize, lambda_t: f64) -> Vec<UserParams> {
    vec![UserParams { lambda: lambda_t / k as f64, p: 1.0 / k as f64 }; k]
}

/// Queue summaries feeding the status chain: P(1|1) and P(0|2) per user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuxProbs {
    pub p11: Vec<f64>,
    pub p02: Vec<f64>,
}

impl AuxProbs {
    /// Light-traffic start: P(1|1) = λ, P(0|2) = 1 − λ.
    pub fn initial(params: &[UserParams]) -> Self {
        AuxProbs {
            p11: params.iter().map(|u| u.lambda).collect(),
            p02: params.iter().map(|u| 1.0 - u.lambda).collect(),
        }
    }
}

/// Success probabilities conditioned on the user's own status.
///
/// `p_i` is conditioned on an idle user that has just received a packet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessProbs {
    pub p_i: Vec<f64>,
    pub p_a: Vec<f64>,
    pub p_b: Vec<f64>,
}

/// Steady-state summaries of one user's queue-length chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueueSteady {
    pub pi00: f64,
    pub pi10: f64,
    pub pi11: f64,
    pub g0: f64,
    pub g1: f64,
    /// P(active) = g1 − pi10, kept separately to avoid cancellation at light load.
    pub active: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Compact {
    blocked: u32,
    active: Option<usize>,
}

fn state_count(k: usize) -> usize {
    (1usize << (k - 1)) * (k + 2)
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if k > K_MAX {
        return Err(Error::TooLarge(format!(
            "K = {k} exceeds {K_MAX}; the status chain grows as 2^(K-1)(K+2)"
        )));
    }
    Ok(())
}

fn index(k: usize, s: Compact) -> usize {
    match s.active {
        None => s.blocked as usize,
        Some(j) => {
            let low = s.blocked & ((1 << j) - 1);
            let high = (s.blocked >> (j + 1)) << j;
            (1 << k) + j * (1 << (k - 1)) + (low | high) as usize
        }
    }
}

fn compact_states(k: usize) -> Vec<Compact> {
    let mut out = Vec::with_capacity(state_count(k));
    for m in 0..(1u32 << k) {
        out.push(Compact { blocked: m, active: None });
    }
    for j in 0..k {
        for m in 0..(1u32 << (k - 1)) {
            let low = m & ((1 << j) - 1);
            let high = (m >> j) << (j + 1);
            out.push(Compact { blocked: low | high, active: Some(j) });
        }
    }
    out
}

fn expand(k: usize, s: Compact) -> StatusVector {
    StatusVector(
        (0..k)
            .map(|i| {
                if s.active == Some(i) {
                    Status::Active
                } else if s.blocked >> i & 1 == 1 {
                    Status::Blocked
                } else {
                    Status::Idle
                }
            })
            .collect(),
    )
}

/// All status vectors, ordered as in [`StatusDistribution::probs`].
pub fn enumerate_states(k: usize) -> Result<Vec<StatusVector>> {
    check_k(k)?;
    Ok(compact_states(k).into_iter().map(|s| expand(k, s)).collect())
}

fn act_out(j: usize, was_active: bool, params: &[UserParams], aux: &AuxProbs) -> f64 {
    let l = params[j].lambda;
    if was_active {
        aux.p11[j] + l * (1.0 - aux.p11[j])
    } else {
        (1.0 - aux.p02[j]) + l * aux.p02[j]
    }
}

/// One-slot transition probability between two status vectors.
///
/// Idle users receive a packet with probability λ; nonempty users attempt
/// with probability p; a slot succeeds when exactly one user attempts. A
/// successful active (blocked) user stays active with probability
/// P(1|1) + λ(1 − P(1|1)) (respectively 1 − P(0|2) + λP(0|2)), otherwise
/// it empties. Nonempty users without success become blocked; idle users
/// that received a packet and did not succeed become blocked.
pub fn status_transition_prob(
    from: &StatusVector,
    to: &StatusVector,
    params: &[UserParams],
    aux: &AuxProbs,
) -> f64 {
    let k = from.0.len();
    if to.0.len() != k || params.len() != k || !from.is_valid() || !to.is_valid() {
        return 0.0;
    }
    let mut leavers = Vec::new();
    let mut base = 1.0;
    let mut contenders = Vec::new();
    let mut stay_idle = Vec::new();
    for i in 0..k {
        let (l, s0, s1) = (params[i].lambda, from.0[i], to.0[i]);
        match (s0, s1) {
            (Status::Idle, Status::Active) => return 0.0,
            (Status::Idle, Status::Blocked) => {
                base *= l;
                contenders.push(i);
            }
            (Status::Idle, Status::Idle) => {
                base *= 1.0 - l;
                stay_idle.push(i);
            }
            (_, Status::Blocked) => contenders.push(i),
            (_, _) => {
                leavers.push(i);
                contenders.push(i);
            }
        }
    }
    let silent: f64 = contenders.iter().map(|&c| 1.0 - params[c].p).product();
    match leavers.as_slice() {
        [] => {
            let one: f64 = contenders.iter().map(|&c| params[c].p / (1.0 - params[c].p) * silent).sum();
            let idle_win: f64 = stay_idle
                .iter()
                .map(|&i| params[i].lambda / (1.0 - params[i].lambda) * params[i].p * silent)
                .sum();
            base * ((1.0 - one) + idle_win)
        }
        [j] => {
            let j = *j;
            let win = base * params[j].p / (1.0 - params[j].p) * silent;
            let a = act_out(j, from.0[j] == Status::Active, params, aux);
            if to.0[j] == Status::Active {
                win * a
            } else {
                win * (1.0 - a)
            }
        }
        _ => 0.0,
    }
}

/// Outgoing transitions of one state, generated by enumerating which idle users receive packets.
fn row(k: usize, s: Compact, params: &[UserParams], aux: &AuxProbs, out: &mut Vec<(usize, f64)>) {
    out.clear();
    let all = (1u32 << k) - 1;
    let active_mask = s.active.map_or(0, |j| 1u32 << j);
    let idle = all & !s.blocked & !active_mask;
    let busy = s.blocked | active_mask;
    let mut w = idle;
    loop {
        let stay = idle & !w;
        let mut base = 1.0;
        let mut silent = 1.0;
        let mut odds = 0.0;
        let mut idle_odds = 0.0;
        for (i, u) in params.iter().enumerate().take(k) {
            let bit = 1u32 << i;
            if stay & bit != 0 {
                base *= 1.0 - u.lambda;
                idle_odds += u.lambda / (1.0 - u.lambda) * u.p;
            } else if w & bit != 0 {
                base *= u.lambda;
            }
            if (w | busy) & bit != 0 {
                silent *= 1.0 - u.p;
                odds += u.p / (1.0 - u.p);
            }
        }
        let blocked_next = busy | w;
        let none = base * ((1.0 - odds * silent) + idle_odds * silent);
        out.push((index(k, Compact { blocked: blocked_next, active: None }), none));
        let mut m = busy;
        while m != 0 {
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            let win = base * params[j].p / (1.0 - params[j].p) * silent;
            let a = act_out(j, s.active == Some(j), params, aux);
            let rest = blocked_next & !(1 << j);
            out.push((index(k, Compact { blocked: rest, active: Some(j) }), win * a));
            out.push((index(k, Compact { blocked: rest, active: None }), win * (1.0 - a)));
        }
        if w == 0 {
            break;
        }
        w = (w - 1) & idle;
    }
}

/// Sparse status chain stored by incoming transitions.
struct StatusChain {
    k: usize,
    /// incoming[j] = (i, T_ij) for i ≠ j.
    incoming: Vec<Vec<(u32, f64)>>,
    diag: Vec<f64>,
}

fn build_chain(params: &[UserParams], aux: &AuxProbs) -> StatusChain {
    let k = params.len();
    let states = compact_states(k);
    let n = states.len();
    let mut incoming: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let mut diag = vec![0.0; n];
    let mut buf = Vec::new();
    for (i, &s) in states.iter().enumerate() {
        row(k, s, params, aux, &mut buf);
        for &(j, v) in &buf {
            if j == i {
                diag[j] += v;
            } else if v != 0.0 {
                incoming[j].push((i as u32, v));
            }
        }
    }
    StatusChain { k, incoming, diag }
}

/// Stationary law of the status chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatusDistribution {
    pub k: usize,
    /// Probabilities in [`enumerate_states`] order.
    pub probs: Vec<f64>,
}

impl StatusDistribution {
    pub fn prob(&self, s: &StatusVector) -> f64 {
        self.probs[index(self.k, s.compact())]
    }
}

fn gauss_seidel(chain: &StatusChain, start: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = chain.diag.len();
    let mut pi = match start {
        Some(s) if s.len() == n => s.to_vec(),
        _ => vec![1.0 / n as f64; n],
    };
    let max_sweeps = 200_000;
    let mut last = f64::INFINITY;
    for sweep in 0..max_sweeps {
        for j in 0..n {
            let inflow: f64 = chain.incoming[j].iter().map(|&(i, v)| pi[i as usize] * v).sum();
            let out = 1.0 - chain.diag[j];
            pi[j] = if out > 0.0 { inflow / out } else { pi[j] };
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= total);
        if sweep % 4 == 3 {
            last = balance_residual(chain, &pi);
            if last < 1e-13 {
                return Ok(pi);
            }
        }
    }
    Err(Error::NoConvergence { iterations: max_sweeps, residual: last, trace: vec![] })
}

fn balance_residual(chain: &StatusChain, pi: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..pi.len() {
        let inflow: f64 = chain.incoming[j].iter().map(|&(i, v)| pi[i as usize] * v).sum::<f64>()
            + pi[j] * chain.diag[j];
        worst = worst.max((inflow - pi[j]).abs());
    }
    worst
}

/// Steady state of the status chain for fixed queue summaries.
pub fn status_stationary(params: &[UserParams], aux: &AuxProbs) -> Result<StatusDistribution> {
    stationary_from(params, aux, None)
}

fn stationary_from(params: &[UserParams], aux: &AuxProbs, start: Option<&[f64]>) -> Result<StatusDistribution> {
    check_k(params.len())?;
    for u in params {
        u.validate()?;
    }
    let k = params.len();
    if params.iter().all(|u| u.lambda == 0.0) {
        let mut probs = vec![0.0; state_count(k)];
        probs[0] = 1.0;
        return Ok(StatusDistribution { k, probs });
    }
    let chain = build_chain(params, aux);
    let probs = gauss_seidel(&chain, start)?;
    debug_assert_eq!(chain.k, k);
    Ok(StatusDistribution { k, probs })
}

/// Success probabilities averaged over the other users' statuses.
pub fn success_probs(stationary: &StatusDistribution, params: &[UserParams]) -> Result<SuccessProbs> {
    success_impl(stationary, params, false)
}

fn success_impl(stationary: &StatusDistribution, params: &[UserParams], lenient: bool) -> Result<SuccessProbs> {
    let k = stationary.k;
    let states = compact_states(k);
    let mut num = vec![[0.0f64; 3]; k];
    let mut den = vec![[0.0f64; 3]; k];
    let mut all = vec![0.0f64; k];
    let quiet: Vec<[f64; 3]> = params
        .iter()
        .map(|u| {
            let busy = 1.0 - u.p;
            [u.lambda * busy + 1.0 - u.lambda, busy, busy]
        })
        .collect();
    for (s, &w) in states.iter().zip(&stationary.probs) {
        if w == 0.0 {
            continue;
        }
        let st: Vec<usize> = (0..k)
            .map(|i| if s.active == Some(i) { 1 } else if s.blocked >> i & 1 == 1 { 2 } else { 0 })
            .collect();
        let full: f64 = (0..k).map(|j| quiet[j][st[j]]).product();
        for i in 0..k {
            let others = full / quiet[i][st[i]];
            let v = w * params[i].p * others;
            num[i][st[i]] += v;
            den[i][st[i]] += w;
            all[i] += v;
        }
    }
    let names = ["idle", "active", "blocked"];
    let mut out = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    for i in 0..k {
        for x in 0..3 {
            out[x][i] = if den[i][x] > 0.0 {
                num[i][x] / den[i][x]
            } else if lenient {
                all[i]
            } else {
                return Err(Error::Degenerate(format!("user {i} is never {}", names[x])));
            };
        }
    }
    let [p_i, p_a, p_b] = out;
    Ok(SuccessProbs { p_i, p_a, p_b })
}

/// Closed-form queue-chain summaries for one user.
pub fn queue_steady_user(p_i: f64, p_a: f64, p_b: f64, lambda: f64) -> Result<QueueSteady> {
    let lb = 1.0 - lambda;
    let den = lb * p_b - lambda * (p_i - p_a);
    if !(den > 0.0) {
        return Err(Error::Unstable(format!("queue denominator {den:e} is not positive")));
    }
    let num = lb * p_b - lambda * (1.0 - p_a);
    if !(num > 0.0) {
        return Err(Error::Unstable(format!("arrival rate {lambda} exceeds the service capacity")));
    }
    let pi10 = num / den;
    let pi00 = lambda * (1.0 - p_i) / (lambda * p_a + lb * p_b) * pi10;
    let pi11 = lambda / lb * pi00;
    let g0 = lambda * lb * (1.0 - p_i) / den;
    let g1 = lambda + lb * pi10;
    let active = lambda * lambda * (1.0 - p_i) / den;
    Ok(QueueSteady { pi00, pi10, pi11, g0, g1, active })
}

/// Queue-chain summaries for every user.
pub fn queue_steady(sp: &SuccessProbs, lambdas: &[f64]) -> Result<Vec<QueueSteady>> {
    (0..lambdas.len())
        .map(|i| queue_steady_user(sp.p_i[i], sp.p_a[i], sp.p_b[i], lambdas[i]))
        .collect()
}

fn clamp_unit(x: f64, what: &str) -> Result<f64> {
    if (-1e-9..=1.0 + 1e-9).contains(&x) {
        Ok(x.clamp(0.0, 1.0))
    } else {
        Err(Error::Degenerate(format!("{what} = {x} outside [0, 1]")))
    }
}

/// (P(1|1), P(0|2)) from the queue-chain summaries.
pub fn aux_update(qs: &QueueSteady) -> Result<(f64, f64)> {
    let act = qs.active;
    if !(act > 0.0) || !(qs.g0 > 0.0) {
        return Err(Error::Degenerate("queue never active or never blocked".into()));
    }
    let p11 = clamp_unit(1.0 - qs.pi11 / act, "P(1|1)")?;
    let p02 = clamp_unit(qs.pi00 / qs.g0, "P(0|2)")?;
    Ok((p11, p02))
}

/// Converged coupled solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Model1Solution {
    pub params: Vec<UserParams>,
    pub success: SuccessProbs,
    pub queues: Vec<QueueSteady>,
    pub aux: AuxProbs,
    pub status: StatusDistribution,
    pub iterations: usize,
    /// Max-norm change of the queue summaries per outer iteration.
    pub residuals: Vec<f64>,
}

struct Evaluation {
    status: StatusDistribution,
    success: SuccessProbs,
    queues: Vec<QueueSteady>,
    next: AuxProbs,
}

fn evaluate(params: &[UserParams], aux: &AuxProbs, warm: Option<&[f64]>) -> Result<Evaluation> {
    let status = stationary_from(params, aux, warm)?;
    let success = success_impl(&status, params, true)?;
    let lambdas: Vec<f64> = params.iter().map(|u| u.lambda).collect();
    let queues = queue_steady(&success, &lambdas)?;
    let mut next = aux.clone();
    for (i, q) in queues.iter().enumerate() {
        if params[i].lambda > 0.0 {
            let (a, b) = aux_update(q)?;
            next.p11[i] = a;
            next.p02[i] = b;
        }
    }
    Ok(Evaluation { status, success, queues, next })
}

fn flatten(a: &AuxProbs) -> Vec<f64> {
    a.p11.iter().chain(&a.p02).copied().collect()
}

fn unflatten(x: &[f64]) -> AuxProbs {
    let k = x.len() / 2;
    AuxProbs { p11: x[..k].to_vec(), p02: x[k..].to_vec() }
}

/// Solves the coupled chains with coordinatewise Wegstein acceleration,
/// falling back to damped Picard iteration when the residual grows.
pub fn solve_model1(params: &[UserParams], tol: f64, max_iter: usize) -> Result<Model1Solution> {
    check_k(params.len())?;
    for u in params {
        u.validate()?;
    }
    let mut x = flatten(&AuxProbs::initial(params));
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut residuals = Vec::new();
    let mut picard = false;
    let mut rising = 0;
    let mut warm: Option<Vec<f64>> = None;
    for it in 0..max_iter {
        let ev = match evaluate(params, &unflatten(&x), warm.as_deref()) {
            Ok(ev) => ev,
            Err(e) => match &prev {
                Some((px, pg)) if !picard => {
                    picard = true;
                    x = px.iter().zip(pg).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
                    continue;
                }
                _ => return Err(e),
            },
        };
        let gx = flatten(&ev.next);
        let r = gx.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if let Some(&last) = residuals.last() {
            rising = if r > last { rising + 1 } else { 0 };
            if rising >= 2 {
                picard = true;
            }
        }
        residuals.push(r);
        warm = Some(ev.status.probs.clone());
        if r < tol {
            return Ok(Model1Solution {
                params: params.to_vec(),
                success: ev.success,
                queues: ev.queues,
                aux: unflatten(&x),
                status: ev.status,
                iterations: it + 1,
                residuals,
            });
        }
        let next: Vec<f64> = match (&prev, picard) {
            (Some((px, pg)), false) => x
                .iter()
                .zip(&gx)
                .zip(px.iter().zip(pg))
                .map(|((&xn, &gn), (&xp, &gp))| {
                    let dx = xn - xp;
                    let q = if dx.abs() > 1e-15 {
                        let s = (gn - gp) / dx;
                        (s / (s - 1.0)).clamp(-5.0, 0.9)
                    } else {
                        0.0
                    };
                    q * xn + (1.0 - q) * gn
                })
                .collect(),
            (_, true) => x.iter().zip(&gx).map(|(a, b)| 0.5 * a + 0.5 * b).collect(),
            (None, false) => gx.clone(),
        };
        prev = Some((x, gx));
        x = next.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
        trace: residuals,
    })
}

/// Mean queue size excluding a blocked head-of-line packet.
pub fn mean_queue_user(p_i: f64, p_a: f64, p_b: f64, lambda: f64) -> f64 {
    let lb = 1.0 - lambda;
    let den = lb * p_b - lambda * (p_i - p_a);
    lambda * lambda * lb * (1.0 - p_i) / ((lb * p_b - lambda * (1.0 - p_a)) * den)
}

/// Performance metrics of model I.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Model1Metrics {
    pub per_user: Vec<QModelSolution>,
    /// Arrival-weighted delay Σ D_i λ_i / Σ λ_i.
    pub system_delay: Option<f64>,
}

/// Queue length, time in line, service time, delay and success probability per user.
///
/// The success probability divides the per-slot success rate by the
/// probability of attempting with a nonempty queue after arrivals,
/// p(1 − (1 − λ)π(1,0)).
pub fn metrics_model1(solution: &Model1Solution) -> Model1Metrics {
    let mut per_user = Vec::new();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, u) in solution.params.iter().enumerate() {
        let (pi, pa, pb) = (solution.success.p_i[i], solution.success.p_a[i], solution.success.p_b[i]);
        let q = solution.queues[i];
        let l = u.lambda;
        let lb = 1.0 - l;
        let busy = 1.0 - lb * q.pi10;
        let mean_queue = mean_queue_user(pi, pa, pb, l);
        let (service, wq, succ) = if l > 0.0 {
            let rate = pa * q.active + l * pi * q.pi10 + pb * q.g0;
            (Some(q.g0 / busy / pb), Some(mean_queue / l), Some(rate / (u.p * busy)))
        } else {
            (None, None, None)
        };
        let delay = match (wq, service) {
            (Some(a), Some(b)) => Some(a + b + 1.0),
            _ => None,
        };
        if let Some(d) = delay {
            num += d * l;
            den += l;
        }
        per_user.push(QModelSolution {
            success_prob: succ,
            mean_queue,
            time_in_line: wq,
            service_time: service,
            delay,
        });
    }
    Model1Metrics { per_user, system_delay: if den > 0.0 { Some(num / den) } else { None } }
}
