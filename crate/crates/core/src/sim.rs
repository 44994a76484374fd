//! Slotted Monte Carlo simulator of K users sharing one channel.
//!
//! Slot order per user: channel state update, arrivals, queue bookkeeping,
//! attempt decision. A slot with exactly one transmitter delivers that
//! user's head-of-line packet at the end of the slot; two or more
//! transmitters collide and every packet stays put.

use crate::channel::{sample_capacity, sample_stationary_state, step_state, ChannelModel, UserState};
use crate::dsched::ThresholdPlan;
use crate::error::{Error, Result};
use crate::stats::{poisson_chi_square, Estimate, FitTest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;

/// How a backlogged user decides to transmit in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AttemptRule {
    /// Transmit when the drawn capacity exceeds `u`.
    Threshold(f64),
    /// Transmit with a fixed probability.
    Probability(f64),
    /// Transmit with a probability selected by the channel state.
    PerState { good: f64, bad: f64 },
}

impl From<ThresholdPlan> for AttemptRule {
    fn from(plan: ThresholdPlan) -> Self {
        AttemptRule::Threshold(plan.u)
    }
}

/// Per-user arrival process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Arrivals {
    /// At most one packet per slot with the given probability.
    BernoulliPerSlot(f64),
    /// Poisson number of packets per slot with the given mean.
    PoissonRate(f64),
    /// Queues never empty.
    Saturated,
}

/// How per-slot capacities are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CapacityMode {
    /// Each user's Good/Bad chain evolves slot by slot.
    ChainDependent,
    /// The state is redrawn from the stationary law every slot.
    IIDMixture,
    /// Always the Good-state Gaussian.
    IIDGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub k: usize,
    pub model: ChannelModel,
    pub attempt: AttemptRule,
    pub arrivals: Arrivals,
    pub horizon: u64,
    pub warmup: u64,
    pub replications: usize,
    pub seed: u64,
    pub capacity_mode: CapacityMode,
}

impl SimConfig {
    /// Defaults: 10^6 slots, 20% warm-up, one replication, seed 0, chain-dependent capacities.
    pub fn new(k: usize, model: ChannelModel, attempt: AttemptRule, arrivals: Arrivals) -> Self {
        SimConfig {
            k,
            model,
            attempt,
            arrivals,
            horizon: 1_000_000,
            warmup: 200_000,
            replications: 1,
            seed: 0,
            capacity_mode: CapacityMode::ChainDependent,
        }
    }

    /// Sets the horizon and a 20% warm-up.
    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self.warmup = horizon / 5;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_capacity_mode(mut self, mode: CapacityMode) -> Self {
        self.capacity_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.k == 0 || self.k > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!("K = {} out of range", self.k)));
        }
        if self.warmup >= self.horizon {
            return Err(Error::InvalidParameter("warmup must be shorter than the horizon".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("at least one replication is required".into()));
        }
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        match self.attempt {
            AttemptRule::Threshold(u) if u.is_nan() => {
                return Err(Error::InvalidParameter("threshold is NaN".into()));
            }
            AttemptRule::Probability(p) if !prob(p) => {
                return Err(Error::InvalidParameter(format!("attempt probability {p} outside [0, 1]")));
            }
            AttemptRule::PerState { good, bad } if !prob(good) || !prob(bad) => {
                return Err(Error::InvalidParameter("per-state attempt probabilities outside [0, 1]".into()));
            }
            _ => {}
        }
        match self.arrivals {
            Arrivals::BernoulliPerSlot(l) if !prob(l) => {
                Err(Error::InvalidParameter(format!("arrival probability {l} outside [0, 1]")))
            }
            Arrivals::PoissonRate(l) if !(l >= 0.0 && l.is_finite()) => {
                Err(Error::InvalidParameter(format!("arrival rate {l} must be finite and nonnegative")))
            }
            _ => Ok(()),
        }
    }
}

/// Across-replication estimates. Per-user quantities are averaged over users.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub k: usize,
    pub seed: u64,
    pub horizon: u64,
    pub warmup: u64,
    pub replications: usize,
    /// Packets in a user's queue right after arrivals.
    pub mean_queue: Estimate,
    /// Packets in a user's queue at the start of the slot.
    pub mean_queue_slot_start: Estimate,
    /// Slot-start queue excluding a head-of-line packet that was blocked in the previous slot.
    pub mean_queue_unblocked: Estimate,
    /// Arrival to head of line.
    pub time_in_line: Estimate,
    /// Head of line to the end of the successful slot.
    pub service_time: Estimate,
    /// Arrival to the end of the successful slot.
    pub sojourn: Estimate,
    /// Fraction of attempts that succeed.
    pub success_prob: Estimate,
    /// Fraction of attempts that collide.
    pub collision_prob: Estimate,
    /// Successful transmissions per slot, system-wide.
    pub throughput: Estimate,
    pub idle_slot_fraction: Estimate,
    pub collision_slot_fraction: Estimate,
    /// Attempts per user per slot.
    pub attempt_rate: Estimate,
    /// Fraction of user-slots with an empty queue after arrivals.
    pub empty_fraction: Estimate,
    /// Joint fraction of user-slots that are empty and in the Good state.
    pub empty_good: Estimate,
    pub empty_bad: Estimate,
    /// Mean of the per-slot maximum capacity (threshold rule only).
    pub max_capacity: Estimate,
    /// Arrivals equal departures plus final content in every replication.
    pub flow_conserved: bool,
}

#[derive(Debug, Default, Clone)]
struct RepStats {
    slots: u64,
    user_slots: u64,
    q_post: f64,
    q_start: f64,
    q_unblocked: f64,
    wait_sum: f64,
    service_sum: f64,
    sojourn_sum: f64,
    packets: u64,
    attempts: u64,
    successes: u64,
    idle_slots: u64,
    collision_slots: u64,
    empty: u64,
    empty_good: u64,
    empty_bad: u64,
    max_cap_sum: f64,
    max_cap_slots: u64,
    flow_ok: bool,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        f64::NAN
    }
}

struct User {
    rng: ChaCha8Rng,
    state: UserState,
    queue: VecDeque<u64>,
    hol_since: u64,
    blocked: bool,
}

/// Counter-based stream for a (replication, user) pair.
pub fn stream_rng(seed: u64, replication: u64, user: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replication << 32) | user);
    rng
}

fn next_state<R: Rng + ?Sized>(s: UserState, mode: CapacityMode, model: &ChannelModel, rng: &mut R) -> UserState {
    match mode {
        CapacityMode::ChainDependent => step_state(s, model, rng),
        CapacityMode::IIDMixture => sample_stationary_state(model, rng),
        CapacityMode::IIDGaussian => UserState::Good,
    }
}

fn initial_state<R: Rng + ?Sized>(mode: CapacityMode, model: &ChannelModel, rng: &mut R) -> UserState {
    match mode {
        CapacityMode::IIDGaussian => UserState::Good,
        _ => sample_stationary_state(model, rng),
    }
}

fn run_replication(cfg: &SimConfig, rep: u64) -> RepStats {
    let saturated = matches!(cfg.arrivals, Arrivals::Saturated);
    let poisson = match cfg.arrivals {
        Arrivals::PoissonRate(l) if l > 0.0 => Poisson::new(l).ok(),
        _ => None,
    };
    let mut users: Vec<User> = (0..cfg.k as u64)
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, rep, i);
            let state = initial_state(cfg.capacity_mode, &cfg.model, &mut rng);
            User { rng, state, queue: VecDeque::new(), hol_since: 0, blocked: false }
        })
        .collect();
    let mut st = RepStats { flow_ok: true, ..Default::default() };
    let mut tx = vec![false; cfg.k];
    let (mut arrived, mut departed) = (0u64, 0u64);

    for t in 0..cfg.horizon {
        let measure = t >= cfg.warmup;
        let mut max_cap = f64::NEG_INFINITY;
        let mut ntx = 0usize;
        for (u, flag) in users.iter_mut().zip(tx.iter_mut()) {
            u.state = next_state(u.state, cfg.capacity_mode, &cfg.model, &mut u.rng);
            let before = u.queue.len();
            if measure && !saturated {
                st.q_start += before as f64;
                st.q_unblocked += (before - usize::from(u.blocked && before > 0)) as f64;
            }
            let n_new = match cfg.arrivals {
                Arrivals::BernoulliPerSlot(l) => u64::from(u.rng.random::<f64>() < l),
                Arrivals::PoissonRate(_) => poisson.as_ref().map_or(0, |d| d.sample(&mut u.rng) as u64),
                Arrivals::Saturated => 0,
            };
            for _ in 0..n_new {
                u.queue.push_back(t);
            }
            arrived += n_new;
            if before == 0 && n_new > 0 {
                u.hol_since = t;
            }
            let len = u.queue.len();
            let nonempty = saturated || len > 0;
            if measure && !saturated {
                st.q_post += len as f64;
                if len == 0 {
                    st.empty += 1;
                    match u.state {
                        UserState::Good => st.empty_good += 1,
                        UserState::Bad => st.empty_bad += 1,
                    }
                }
            }
            *flag = match cfg.attempt {
                AttemptRule::Threshold(th) => {
                    let c = sample_capacity(u.state, &cfg.model, &mut u.rng);
                    max_cap = max_cap.max(c);
                    nonempty && c > th
                }
                AttemptRule::Probability(p) => nonempty && u.rng.random::<f64>() < p,
                AttemptRule::PerState { good, bad } => {
                    let p = if u.state == UserState::Good { good } else { bad };
                    nonempty && u.rng.random::<f64>() < p
                }
            };
            ntx += usize::from(*flag);
        }

        for (u, &sent) in users.iter_mut().zip(&tx) {
            let nonempty = saturated || !u.queue.is_empty();
            if !nonempty {
                u.blocked = false;
                continue;
            }
            if sent && measure {
                st.attempts += 1;
            }
            if sent && ntx == 1 {
                departed += 1;
                if measure {
                    st.successes += 1;
                }
                if saturated {
                    if u.hol_since >= cfg.warmup {
                        st.service_sum += (t + 1 - u.hol_since) as f64;
                        st.packets += 1;
                    }
                } else if let Some(a) = u.queue.pop_front() {
                    if a >= cfg.warmup {
                        st.wait_sum += (u.hol_since - a) as f64;
                        st.service_sum += (t + 1 - u.hol_since) as f64;
                        st.sojourn_sum += (t + 1 - a) as f64;
                        st.packets += 1;
                    }
                }
                u.hol_since = t + 1;
                u.blocked = false;
            } else {
                u.blocked = true;
            }
        }

        if measure {
            st.slots += 1;
            st.user_slots += cfg.k as u64;
            match ntx {
                0 => st.idle_slots += 1,
                1 => {}
                _ => st.collision_slots += 1,
            }
            if max_cap.is_finite() {
                st.max_cap_sum += max_cap;
                st.max_cap_slots += 1;
            }
        }
    }
    if !saturated {
        let content: u64 = users.iter().map(|u| u.queue.len() as u64).sum();
        st.flow_ok = arrived == departed + content;
    }
    st
}

/// Runs all replications (in parallel) and summarizes them in replication order.
pub fn run_slotted(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let reps: Vec<RepStats> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| run_replication(cfg, r))
        .collect();
    let est = |f: &dyn Fn(&RepStats) -> f64| {
        let xs: Vec<f64> = reps.iter().map(f).filter(|x| !x.is_nan()).collect();
        Estimate::from_samples(&xs)
    };
    let sat = matches!(cfg.arrivals, Arrivals::Saturated);
    let queue = |x: f64, s: &RepStats| if sat { f64::NAN } else { ratio(x, s.user_slots as f64) };
    Ok(SimResult {
        k: cfg.k,
        seed: cfg.seed,
        horizon: cfg.horizon,
        warmup: cfg.warmup,
        replications: cfg.replications,
        mean_queue: est(&|s| queue(s.q_post, s)),
        mean_queue_slot_start: est(&|s| queue(s.q_start, s)),
        mean_queue_unblocked: est(&|s| queue(s.q_unblocked, s)),
        time_in_line: est(&|s| if sat { f64::NAN } else { ratio(s.wait_sum, s.packets as f64) }),
        service_time: est(&|s| ratio(s.service_sum, s.packets as f64)),
        sojourn: est(&|s| if sat { f64::NAN } else { ratio(s.sojourn_sum, s.packets as f64) }),
        success_prob: est(&|s| ratio(s.successes as f64, s.attempts as f64)),
        collision_prob: est(&|s| 1.0 - ratio(s.successes as f64, s.attempts as f64)),
        throughput: est(&|s| ratio(s.successes as f64, s.slots as f64)),
        idle_slot_fraction: est(&|s| ratio(s.idle_slots as f64, s.slots as f64)),
        collision_slot_fraction: est(&|s| ratio(s.collision_slots as f64, s.slots as f64)),
        attempt_rate: est(&|s| ratio(s.attempts as f64, s.user_slots as f64)),
        empty_fraction: est(&|s| queue(s.empty as f64, s)),
        empty_good: est(&|s| queue(s.empty_good as f64, s)),
        empty_bad: est(&|s| queue(s.empty_bad as f64, s)),
        max_capacity: est(&|s| ratio(s.max_cap_sum, s.max_cap_slots as f64)),
        flow_conserved: reps.iter().all(|s| s.flow_ok),
    })
}

/// Configuration for sampling the per-slot maximum of K capacities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityMaxConfig {
    pub k: usize,
    pub model: ChannelModel,
    pub mode: CapacityMode,
    /// Consecutive slots per replication.
    pub slots: u64,
    pub replications: usize,
    pub seed: u64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn from_samples(xs: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo.is_finite() && hi.is_finite()) {
            return Histogram { edges: Vec::new(), counts: Vec::new() };
        }
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &x in xs {
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityMaxResult {
    /// One maximum per slot, replication-major order.
    pub samples: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub histogram: Histogram,
}

/// Empirical law of max over K users of the per-slot capacity.
pub fn estimate_capacity_max(cfg: &CapacityMaxConfig) -> Result<CapacityMaxResult> {
    cfg.model.validate()?;
    if cfg.k == 0 || cfg.slots == 0 || cfg.replications == 0 {
        return Err(Error::InvalidParameter("K, slots and replications must be positive".into()));
    }
    let per_rep: Vec<Vec<f64>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut maxima = vec![f64::NEG_INFINITY; cfg.slots as usize];
            for i in 0..cfg.k as u64 {
                let mut rng = stream_rng(cfg.seed, r, i);
                let mut s = initial_state(cfg.mode, &cfg.model, &mut rng);
                for (t, m) in maxima.iter_mut().enumerate() {
                    if t > 0 {
                        s = next_state(s, cfg.mode, &cfg.model, &mut rng);
                    }
                    *m = m.max(sample_capacity(s, &cfg.model, &mut rng));
                }
            }
            maxima
        })
        .collect();
    let samples: Vec<f64> = per_rep.into_iter().flatten().collect();
    let (mean, std) = crate::stats::mean_std(&samples);
    let histogram = Histogram::from_samples(&samples, cfg.bins);
    Ok(CapacityMaxResult { samples, mean, std, histogram })
}

/// Configuration for counting exceedances of one user's capacity sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceConfig {
    pub model: ChannelModel,
    pub mode: CapacityMode,
    /// Number of independent windows.
    pub windows: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceResult {
    /// `hist[n]` windows had exactly n exceedances.
    pub hist: Vec<u64>,
    pub mean_count: f64,
}

impl ExceedanceResult {
    /// Empirical Pr(N = n).
    pub fn prob(&self, n: usize) -> f64 {
        let total: u64 = self.hist.iter().sum();
        self.hist.get(n).map_or(0.0, |&c| c as f64 / total as f64)
    }

    /// Chi-square test against Poisson(tau).
    pub fn poisson_fit(&self, tau: f64) -> FitTest {
        poisson_chi_square(&self.hist, tau)
    }
}

/// Counts draws above `level` in windows of `window` consecutive draws.
pub fn exceedance_counts(cfg: &ExceedanceConfig, level: f64, window: u64) -> Result<ExceedanceResult> {
    cfg.model.validate()?;
    if cfg.windows == 0 || window == 0 {
        return Err(Error::InvalidParameter("windows and window length must be positive".into()));
    }
    let counts: Vec<usize> = (0..cfg.windows as u64)
        .into_par_iter()
        .map(|w| {
            let mut rng = stream_rng(cfg.seed, w, 0);
            let mut s = initial_state(cfg.mode, &cfg.model, &mut rng);
            let mut n = 0;
            for t in 0..window {
                if t > 0 {
                    s = next_state(s, cfg.mode, &cfg.model, &mut rng);
                }
                n += usize::from(sample_capacity(s, &cfg.model, &mut rng) > level);
            }
            n
        })
        .collect();
    let top = counts.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0u64; top + 1];
    for &c in &counts {
        hist[c] += 1;
    }
    let mean_count = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    Ok(ExceedanceResult { hist, mean_count })
}

/// Keeps each event independently with probability `retain_prob`.
pub fn thin_events<T: Clone, R: Rng + ?Sized>(events: &[T], retain_prob: f64, rng: &mut R) -> Result<Vec<T>> {
    if !(0.0..=1.0).contains(&retain_prob) {
        return Err(Error::InvalidParameter(format!("retain probability {retain_prob} outside [0, 1]")));
    }
    Ok(events.iter().filter(|_| rng.random::<f64>() < retain_prob).cloned().collect())
}
