//! Acceptance checks run by `gemac validate`, each with pinned tolerances and seeds.
//!
//! Reports contain no timings, so the same seed always renders the same bytes.

use crate::commands::{aloha_sim_config, model3_sim_config};
use gemac_core::channel::{mixture_quantile, sample_capacity, sample_stationary_state};
use gemac_core::dsched::{expected_capacity_distributed, level_for_rate_exact, threshold_exact};
use gemac_core::evt::{expected_capacity_centralized, gumbel_cdf, gumbel_mean, norm_constants_mixture};
use gemac_core::groups::*;
use gemac_core::qmodel1::*;
use gemac_core::qmodel2::{metrics_model2, p_coll_map, solve_p_coll, solve_symmetric};
use gemac_core::qmodel3::{mean_queue, solve_model3_symmetric, solve_z0, TDQueueParams};
use gemac_core::sim::*;
use gemac_core::stats::{ks_test, mean_std};
use gemac_core::ChannelModel;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Reference values the checks compare against. Tests replace them to make
/// sure a wrong constant is caught.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixtures {
    /// Pr(N = 0), Pr(N = 1), Pr(N = 2) of the exceedance count.
    pub poisson_table: [f64; 3],
    /// Mean exceedance count the table was computed for.
    pub poisson_tau: f64,
    /// Backlogged collision probability, 1 − e⁻¹.
    pub backlogged_p_coll: f64,
    /// Distributed-to-centralized capacity ratio, e⁻¹.
    pub capacity_ratio: f64,
}

impl Default for Fixtures {
    fn default() -> Self {
        let e1 = (-1.0f64).exp();
        Fixtures {
            poisson_table: [0.3961, 0.3668, 0.1698],
            poisson_tau: -(0.3961f64).ln(),
            backlogged_p_coll: 1.0 - e1,
            capacity_ratio: e1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub seed: u64,
    pub fixtures: Fixtures,
}

impl Default for Options {
    fn default() -> Self {
        Options { seed: DEFAULT_SEED, fixtures: Fixtures::default() }
    }
}

impl Options {
    fn seed(&self, id: u8, local: u64) -> u64 {
        self.seed.wrapping_mul(1_000_003).wrapping_add(u64::from(id) * 1000 + local)
    }
}

pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub budget_secs: u64,
}

pub const CRITERIA: [Criterion; 11] = [
    Criterion { id: 1, title: "EVT reduction to Gaussian constants", budget_secs: 1 },
    Criterion { id: 2, title: "Gumbel fit of the K=5000 maximum", budget_secs: 120 },
    Criterion { id: 3, title: "distributed-to-centralized ratio", budget_secs: 1 },
    Criterion { id: 4, title: "backlogged collision probability", budget_secs: 120 },
    Criterion { id: 5, title: "Poisson exceedance table", budget_secs: 60 },
    Criterion { id: 6, title: "status chain rows and slot oracle", budget_secs: 600 },
    Criterion { id: 7, title: "model I against simulation", budget_secs: 900 },
    Criterion { id: 8, title: "model II fixed point and service time", budget_secs: 300 },
    Criterion { id: 9, title: "model III reduction and K-sweep", budget_secs: 600 },
    Criterion { id: 10, title: "group-size chain structure and bounds", budget_secs: 300 },
    Criterion { id: 11, title: "byte-identical reports", budget_secs: 1800 },
];

pub fn criterion(id: u8) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    pub details: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub seed: u64,
    pub outcomes: Vec<Outcome>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }

    pub fn failed_ids(&self) -> Vec<u8> {
        self.outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect()
    }

    pub fn render(&self) -> String {
        let mut s = format!("gemac validation report, seed {}\n", self.seed);
        for o in &self.outcomes {
            let _ = writeln!(s, "[{}] {}. {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.title);
            for d in &o.details {
                let _ = writeln!(s, "    {d}");
            }
        }
        let n = self.outcomes.iter().filter(|o| o.pass).count();
        let _ = writeln!(s, "{n}/{} criteria passed", self.outcomes.len());
        s
    }
}

/// Collects detail lines and the overall verdict of one criterion.
struct Check {
    pass: bool,
    details: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { pass: true, details: Vec::new() }
    }

    fn require(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.details.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.details.push(format!("     {line}"));
    }

    /// Records a failed computation instead of aborting the report.
    fn attempt<T, E: std::fmt::Display>(&mut self, what: &str, r: Result<T, E>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.require(false, format!("{what}: {e}"));
                None
            }
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Runs one criterion (1..=10). Criterion 11 needs [`run`].
pub fn run_criterion(id: u8, opts: &Options) -> Outcome {
    let c = match id {
        1 => evt_reduction(),
        2 => gumbel_fit(opts),
        3 => capacity_ratio(opts),
        4 => backlogged_collisions(opts),
        5 => poisson_table(opts),
        6 => status_chain(opts),
        7 => model1_vs_sim(opts),
        8 => model2_checks(opts),
        9 => model3_checks(opts),
        10 => groups_checks(opts),
        _ => {
            let mut c = Check::new();
            c.require(false, format!("no criterion {id} runs on its own"));
            c
        }
    };
    let title = criterion(id).map_or("unknown", |c| c.title);
    Outcome { id, title: title.to_string(), pass: c.pass, details: c.details }
}

/// Compares two renderings of the same report.
pub fn determinism_outcome(first: &Report, second: &Report) -> Outcome {
    let (a, b) = (first.render(), second.render());
    let mut c = Check::new();
    let ids: Vec<String> = first.outcomes.iter().map(|o| o.id.to_string()).collect();
    c.require(a == b, format!("criteria {} rerun with seed {}: {} bytes each, identical = {}", ids.join(","), first.seed, a.len(), a == b));
    Outcome { id: 11, title: criterion(11).unwrap().title.to_string(), pass: c.pass, details: c.details }
}

/// Runs the selected criteria in order. Criterion 11 reruns the others and compares.
pub fn run(ids: &[u8], opts: &Options) -> Report {
    let base: Vec<u8> = ids.iter().copied().filter(|&i| i != 11).collect();
    let build = || Report { seed: opts.seed, outcomes: base.iter().map(|&i| run_criterion(i, opts)).collect() };
    let mut report = build();
    if ids.contains(&11) {
        let again = build();
        report.outcomes.push(determinism_outcome(&report, &again));
    }
    report
}

fn evt_reduction() -> Check {
    let mut c = Check::new();
    let model = ChannelModel::new(0.0, 0.1, SQRT_2, 0.5, 0.0, 0.3).expect("valid model");
    for k in [10u64, 1_000, 1_000_000] {
        let n = k as f64;
        let l = (2.0 * n.ln()).sqrt();
        let a = l / model.sigma_g;
        let b = model.mu_g + model.sigma_g * (l - (n.ln().ln() + (4.0 * PI).ln()) / (2.0 * l));
        let Some(g) = c.attempt("constants", norm_constants_mixture(k, &model)) else { continue };
        let (da, db) = ((g.a - a).abs(), (g.b - b).abs());
        c.require(da <= 1e-12 && db <= 1e-12, format!("K={k}: |a_K - a| = {da:.3e}, |b_K - b| = {db:.3e} (tol 1e-12)"));
    }
    c
}

fn gumbel_fit(opts: &Options) -> Check {
    let mut c = Check::new();
    let model = ChannelModel::reference();
    let cfg = CapacityMaxConfig { k: 5000, model, mode: CapacityMode::IIDMixture, slots: 200, replications: 10, seed: opts.seed(2, 0), bins: 40 };
    let (Some(r), Some(g)) = (c.attempt("simulation", estimate_capacity_max(&cfg)), c.attempt("constants", norm_constants_mixture(5000, &model)))
    else {
        return c;
    };
    let fit = ks_test(&r.samples, |x| gumbel_cdf(x, &g));
    c.require(
        fit.passes(0.01),
        format!("{} maxima: KS D = {:.5}, p = {:.3e} (pass at significance 0.01)", r.samples.len(), fit.statistic, fit.p_value),
    );
    c.note(format!("sample mean {:.5}, Gumbel mean {:.5}", r.mean, gumbel_mean(&g)));
    c
}

fn capacity_ratio(opts: &Options) -> Check {
    let mut c = Check::new();
    let model = ChannelModel::reference();
    let k = 100_000;
    let (Some(d), Some(central)) = (
        c.attempt("distributed", expected_capacity_distributed(k, &model)),
        c.attempt("centralized", expected_capacity_centralized(k, &model)),
    ) else {
        return c;
    };
    let ratio = d.capacity / central;
    let target = opts.fixtures.capacity_ratio;
    c.require((ratio - target).abs() <= 0.02, format!("K={k}: ratio {ratio:.5} vs {target:.5} (tol 0.02)"));
    c
}

fn backlogged_collisions(opts: &Options) -> Check {
    let mut c = Check::new();
    let model = ChannelModel::reference();
    let k = 1000;
    let Some(plan) = c.attempt("threshold", threshold_exact(k as u64, &model)) else { return c };
    let cfg = SimConfig::new(k, model, plan.into(), Arrivals::Saturated)
        .with_horizon(20_000)
        .with_replications(4)
        .with_seed(opts.seed(4, 0));
    let Some(r) = c.attempt("simulation", run_slotted(&cfg)) else { return c };
    let target = opts.fixtures.backlogged_p_coll;
    let p = r.collision_prob.mean;
    c.require((p - target).abs() <= 0.02, format!("K={k}, u = {:.5}: p_coll {p:.5} vs {target:.5} (tol 0.02)", plan.u));
    c
}

fn poisson_table(opts: &Options) -> Check {
    let mut c = Check::new();
    let f = opts.fixtures;
    let (n, tau) = (10_000u64, f.poisson_tau);
    let gauss = ChannelModel::new(0.1, 0.1, 0.0, 1.0, -1.0, 0.5).expect("valid model");
    let Some(level) = c.attempt("level", level_for_rate_exact(tau, n, 0.0, 1.0)) else { return c };
    let cfg = ExceedanceConfig { model: gauss, mode: CapacityMode::IIDGaussian, windows: 40_000, seed: opts.seed(5, 0) };
    if let Some(r) = c.attempt("gaussian exceedances", exceedance_counts(&cfg, level, n)) {
        for (j, &want) in f.poisson_table.iter().enumerate() {
            let got = r.prob(j);
            c.require((got - want).abs() <= 0.01, format!("iid N(0,1), n={n}: Pr(N={j}) = {got:.4} vs {want:.4} (tol 0.01)"));
        }
    }

    let model = ChannelModel::reference();
    let Some(u) = c.attempt("mixture level", mixture_quantile(1.0 - tau / n as f64, &model)) else { return c };
    let cfg = ExceedanceConfig { model, mode: CapacityMode::ChainDependent, windows: 10_000, seed: opts.seed(5, 1) };
    if let Some(r) = c.attempt("chain exceedances", exceedance_counts(&cfg, u, n)) {
        let fit = r.poisson_fit(tau);
        c.require(
            fit.passes(0.01),
            format!("Gilbert-Elliott chain, n={n}, tau={tau:.4}: chi-square {:.3} on {} dof, p = {:.4}", fit.statistic, fit.dof, fit.p_value),
        );
    }
    c
}

/// Event-level slot: arrivals to idle users, attempts, collisions, then the
/// winner's remaining backlog drawn from the queue summaries.
fn oracle_step<R: Rng>(from: &StatusVector, params: &[UserParams], aux: &AuxProbs, r: &mut R) -> StatusVector {
    let k = from.0.len();
    let has: Vec<bool> = (0..k).map(|i| from.0[i] != Status::Idle || r.random::<f64>() < params[i].lambda).collect();
    let tx: Vec<bool> = (0..k).map(|i| has[i] && r.random::<f64>() < params[i].p).collect();
    let winners = tx.iter().filter(|&&t| t).count();
    let mut next = vec![Status::Idle; k];
    for i in 0..k {
        if !has[i] {
            continue;
        }
        if tx[i] && winners == 1 {
            let more = match from.0[i] {
                Status::Idle => false,
                Status::Active => r.random::<f64>() < aux.p11[i],
                Status::Blocked => r.random::<f64>() >= aux.p02[i],
            };
            let arrival = from.0[i] != Status::Idle && r.random::<f64>() < params[i].lambda;
            next[i] = if more || arrival { Status::Active } else { Status::Idle };
        } else {
            next[i] = Status::Blocked;
        }
    }
    StatusVector(next)
}

struct RowCheck {
    k: usize,
    row_sum_err: f64,
    cells: usize,
    misses: Vec<String>,
    worst_z: f64,
}

fn check_row(k: usize, from: usize, states: &[StatusVector], params: &[UserParams], aux: &AuxProbs, trials: u64, seed: u64) -> RowCheck {
    let index: HashMap<&StatusVector, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let probs: Vec<f64> = states.iter().map(|to| status_transition_prob(&states[from], to, params, aux)).collect();
    let row_sum_err = (probs.iter().sum::<f64>() - 1.0).abs();
    let mut counts = vec![0u64; states.len()];
    let mut r = stream_rng(seed, k as u64, from as u64);
    for _ in 0..trials {
        counts[index[&oracle_step(&states[from], params, aux, &mut r)]] += 1;
    }
    let mut misses = Vec::new();
    let mut worst_z: f64 = 0.0;
    for (j, (&p, &cnt)) in probs.iter().zip(&counts).enumerate() {
        let f = cnt as f64 / trials as f64;
        let sd = (p * (1.0 - p) / trials as f64).sqrt();
        if sd > 0.0 {
            worst_z = worst_z.max((f - p).abs() / sd);
        }
        if (f - p).abs() > 3.0 * sd + 1e-12 {
            misses.push(format!("K={k} {:?} -> {:?}: oracle {f:.6}, chain {p:.6}", states[from].0, states[j].0));
        }
    }
    RowCheck { k, row_sum_err, cells: probs.len(), misses, worst_z }
}

fn random_population<R: Rng>(k: usize, r: &mut R) -> (Vec<UserParams>, AuxProbs) {
    let params = (0..k).map(|_| UserParams { lambda: r.random_range(0.01..0.4), p: r.random_range(0.05..0.95) }).collect();
    let aux = AuxProbs { p11: (0..k).map(|_| r.random_range(0.0..1.0)).collect(), p02: (0..k).map(|_| r.random_range(0.0..1.0)).collect() };
    (params, aux)
}

fn status_chain(opts: &Options) -> Check {
    let mut c = Check::new();
    let trials = 1_000_000;
    let sampled_rows = 2;
    let mut rows = Vec::new();
    let mut pops = HashMap::new();
    for k in 1..=7usize {
        let mut r = stream_rng(opts.seed(6, 0), k as u64, u64::MAX);
        let pop = random_population(k, &mut r);
        let n = enumerate_states(k).expect("K <= 7").len();
        let chosen: Vec<usize> = if k <= 3 { (0..n).collect() } else { (0..sampled_rows).map(|_| r.random_range(0..n)).collect() };
        rows.extend(chosen.into_iter().map(|i| (k, i)));
        pops.insert(k, pop);
    }
    let states: HashMap<usize, Vec<StatusVector>> = (1..=7).map(|k| (k, enumerate_states(k).expect("K <= 7"))).collect();
    let checks: Vec<RowCheck> = rows
        .par_iter()
        .map(|&(k, i)| {
            let (params, aux) = &pops[&k];
            check_row(k, i, &states[&k], params, aux, trials, opts.seed(6, 1))
        })
        .collect();

    // row sums over many more sampled rows are cheap
    let mut extra_err: f64 = 0.0;
    for k in 4..=7usize {
        let (params, aux) = &pops[&k];
        let st = &states[&k];
        let mut r = stream_rng(opts.seed(6, 2), k as u64, 0);
        for _ in 0..25 {
            let from = &st[r.random_range(0..st.len())];
            let s: f64 = st.iter().map(|to| status_transition_prob(from, to, params, aux)).sum();
            extra_err = extra_err.max((s - 1.0).abs());
        }
    }

    for k in 1..=7usize {
        let mine: Vec<&RowCheck> = checks.iter().filter(|x| x.k == k).collect();
        let err = mine.iter().map(|x| x.row_sum_err).fold(0.0, f64::max);
        let cells: usize = mine.iter().map(|x| x.cells).sum();
        let misses: Vec<&String> = mine.iter().flat_map(|x| &x.misses).collect();
        let z = mine.iter().map(|x| x.worst_z).fold(0.0, f64::max);
        let scope = if k <= 3 { "all" } else { "sampled" };
        c.require(err <= 1e-10, format!("K={k}: {} {scope} rows, max |row sum - 1| = {err:.2e} (tol 1e-10)", mine.len()));
        c.require(
            misses.is_empty(),
            format!("K={k}: {cells} cells against {trials} oracle slots per row, {} outside 3 sigma, worst |z| = {z:.2}", misses.len()),
        );
        for m in misses.iter().take(3) {
            c.note(m.to_string());
        }
    }
    c.require(extra_err <= 1e-10, format!("K=4..7: 100 further sampled rows, max |row sum - 1| = {extra_err:.2e}"));
    c
}

fn model1_vs_sim(opts: &Options) -> Check {
    let mut c = Check::new();
    let sat = (-1.0f64).exp() * (1.0 - 0.001);
    let points: Vec<(usize, f64)> = (2..=10).map(|k| (k, sat)).chain((2..=7).map(|k| (k, 0.15))).collect();
    let results: Vec<Result<Vec<(String, f64, f64, bool)>, String>> = points
        .par_iter()
        .enumerate()
        .map(|(i, &(k, lt))| {
            let sol = solve_model1(&symmetric_params(k, lt), 1e-10, 2000).map_err(|e| e.to_string())?;
            let u = metrics_model1(&sol).per_user[0];
            let cfg = aloha_sim_config(k, lt).with_horizon(1_000_000).with_replications(4).with_seed(opts.seed(7, i as u64));
            let s = run_slotted(&cfg).map_err(|e| e.to_string())?;
            let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
            let relative = [
                ("mean queue", u.mean_queue, s.mean_queue_unblocked.mean),
                ("time in line", v(u.time_in_line), s.time_in_line.mean),
                ("service time", v(u.service_time), s.service_time.mean - 1.0),
            ];
            let mut out: Vec<(String, f64, f64, bool)> =
                relative.iter().map(|&(n, a, b)| (n.to_string(), a, b, rel(a, b) <= 0.10)).collect();
            let (a, b) = (v(u.success_prob), s.success_prob.mean);
            out.push(("success".into(), a, b, (a - b).abs() <= 0.03));
            Ok(out)
        })
        .collect();
    for (&(k, lt), r) in points.iter().zip(results) {
        let Some(metrics) = c.attempt(&format!("K={k} lambda_T={lt:.4}"), r) else { continue };
        let ok = metrics.iter().all(|m| m.3);
        let parts: Vec<String> = metrics
            .iter()
            .map(|(n, a, b, good)| format!("{n} {a:.4}/{b:.4}{}", if *good { "" } else { " !" }))
            .collect();
        c.require(ok, format!("K={k} lambda_T={lt:.4}: model/sim {}", parts.join(", ")));
    }
    c.note("tolerances: 10% relative, success probability 0.03 absolute".into());
    c
}

/// First sign change of f on a grid over [lo, hi], refined by bisection.
fn bisect_first_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Option<f64> {
    let n = 10_000;
    let mut a = lo;
    for i in 1..=n {
        let b = lo + (hi - lo) * i as f64 / n as f64;
        if f(a) <= 0.0 && f(b) >= 0.0 {
            let (mut x, mut y) = (a, b);
            for _ in 0..200 {
                let m = 0.5 * (x + y);
                if f(m) <= 0.0 {
                    x = m;
                } else {
                    y = m;
                }
            }
            return Some(0.5 * (x + y));
        }
        a = b;
    }
    None
}

fn model2_checks(opts: &Options) -> Check {
    let mut c = Check::new();
    let lt = 0.3;
    for k in [20u64, 50, 100] {
        let (lambda, tau) = (lt / k as f64, 1.0 / k as f64);
        let Some(p) = c.attempt("finite-K root", solve_p_coll(lambda, tau, Some(k))) else { continue };
        let res = (p - p_coll_map(p, lambda, tau, Some(k))).abs();
        c.require(res < 1e-12, format!("K={k}: finite-K fixed point residual {res:.2e} (tol 1e-12)"));
        let Some(p) = c.attempt("root", solve_p_coll(lambda, tau, None)) else { continue };
        let res = (p - 1.0 + (-lambda / ((1.0 - p) * tau)).exp()).abs();
        c.require(res < 1e-12, format!("K={k}: exponential fixed point residual {res:.2e} (tol 1e-12)"));
        let oracle = bisect_first_root(|x| x - 1.0 + (-lambda / ((1.0 - x) * tau)).exp(), 0.0, 1.0 - lambda / tau - 1e-12);
        match oracle {
            Some(o) => c.require((p - o).abs() <= 1e-10, format!("K={k}: root {p:.12} vs bisection {o:.12} (tol 1e-10)")),
            None => c.require(false, format!("K={k}: bisection oracle found no root")),
        }
    }
    let runs: Vec<(u64, Result<(f64, f64), String>)> = [20u64, 50, 100]
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let r = (|| {
                let m = metrics_model2(&solve_symmetric(k, lt)?)?;
                let cfg = aloha_sim_config(k as usize, lt).with_horizon(1_000_000).with_replications(10).with_seed(opts.seed(8, i as u64));
                let s = run_slotted(&cfg)?;
                Ok::<_, gemac_core::Error>((m.service_time.unwrap_or(f64::NAN), s.service_time.mean))
            })();
            (k, r.map_err(|e| e.to_string()))
        })
        .collect();
    for (k, r) in runs {
        if let Some((a, b)) = c.attempt(&format!("K={k} service time"), r) {
            c.require(rel(a, b) <= 0.10, format!("K={k} lambda_T={lt}: service time {a:.3} vs simulated {b:.3}, rel {:.4} (tol 0.10)", rel(a, b)));
        }
    }
    c
}

fn model3_checks(opts: &Options) -> Check {
    let mut c = Check::new();
    for (lambda, mu, alpha, beta) in [(0.3, 0.5, 0.1, 0.1), (0.1, 0.7, 0.2, 0.05), (0.45, 0.5, 0.3, 0.6)] {
        let p = TDQueueParams::new(lambda, mu, mu, alpha, beta, 1.0);
        let Some(z0) = c.attempt("root", solve_z0(&p)) else { continue };
        let Some(q) = c.attempt("mean queue", mean_queue(&p, z0)) else { continue };
        let want = lambda / (mu - lambda);
        let d = (q - want).abs();
        c.require(d <= 1e-10, format!("equal rates mu={mu}, lambda={lambda}: Q {q:.12} vs {want:.12}, |diff| {d:.2e} (tol 1e-10)"));
    }
    let points: Vec<(u64, f64)> = [0.1, 0.3].iter().flat_map(|&lt| [50u64, 100, 200].map(|k| (k, lt))).collect();
    let results: Vec<Result<(f64, f64, f64, SimResult), String>> = points
        .par_iter()
        .enumerate()
        .map(|(i, &(k, lt))| {
            let s = solve_model3_symmetric(k, lt, 0.7, 0.5, 0.1, 0.1, 1e-10).map_err(|e| e.to_string())?;
            let cfg = model3_sim_config(k as usize, lt, 0.7, 0.5, 0.1, 0.1).map_err(|e| e.to_string())?;
            let r = run_slotted(&cfg.with_horizon(1_000_000).with_replications(4).with_seed(opts.seed(9, i as u64))).map_err(|e| e.to_string())?;
            Ok((s.p_succ, s.mean_queue, s.wait.unwrap_or(f64::NAN), r))
        })
        .collect();
    for (&(k, lt), r) in points.iter().zip(results) {
        let Some((ps, q, w, s)) = c.attempt(&format!("K={k} lambda_T={lt}"), r) else { continue };
        let ok = (ps - s.success_prob.mean).abs() <= 0.03 && rel(q, s.mean_queue.mean) <= 0.10 && rel(w, s.sojourn.mean) <= 0.10;
        c.require(
            ok,
            format!(
                "K={k} lambda_T={lt}: p_succ {ps:.4}/{:.4}, Q {q:.4}/{:.4}, W {w:.3}/{:.3}",
                s.success_prob.mean, s.mean_queue.mean, s.sojourn.mean
            ),
        );
    }
    c.note("mu_g=0.7, mu_b=0.5, alpha=beta=0.1; p_succ within 0.03, Q and W within 10%".into());
    c
}

fn groups_checks(opts: &Options) -> Check {
    let mut c = Check::new();
    let model = ChannelModel::reference();

    let mut worst_row: f64 = 0.0;
    for k in [1usize, 4, 10, 40, 100] {
        for (a, b) in [(0.1, 0.1), (0.1, 0.3), (0.02, 0.7)] {
            if let Some(ch) = c.attempt("matrix", transition_matrix(k, a, b)) {
                for i in 0..ch.n() {
                    worst_row = worst_row.max((ch.row(i).iter().sum::<f64>() - 1.0).abs());
                }
            }
        }
    }
    c.require(worst_row <= 1e-12, format!("K in {{1,4,10,40,100}}: max |row sum - 1| = {worst_row:.2e} (tol 1e-12)"));

    for k in [10usize, 40] {
        let Some(ch) = c.attempt("matrix", transition_matrix(k, 0.1, 0.1)) else { continue };
        let n = ch.n();
        let (mut centro, mut commute): (f64, f64) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                centro = centro.max((ch.get(i, j) - ch.get(k - i, k - j)).abs());
                // (JP)_ij = P_(K-i)j and (PJ)_ij = P_i(K-j)
                commute = commute.max((ch.get(k - i, j) - ch.get(i, k - j)).abs());
            }
        }
        c.require(centro <= 1e-12 && commute <= 1e-12, format!("K={k}, alpha=beta: centrosymmetry {centro:.2e}, |JP - PJ| {commute:.2e} (tol 1e-12)"));
    }

    for k in [4usize, 10, 40] {
        let Some(pi) = c.attempt("stationary", transition_matrix(k, 0.1, 0.1).and_then(|ch| stationary_chain(&ch))) else { continue };
        let asym = (0..=k).map(|i| (pi[i] - pi[k - i]).abs()).fold(0.0, f64::max);
        let unimodal = (0..k / 2).all(|i| pi[i + 1] >= pi[i] - 1e-12) && (k / 2..k).all(|i| pi[i + 1] <= pi[i] + 1e-12);
        c.require(asym <= 1e-10 && unimodal, format!("K={k}: stationary asymmetry {asym:.2e}, unimodal about K/2 = {unimodal}"));
    }

    if let Some(analytic) = c.attempt("by-state expectation", expected_capacity_by_state(4, &model, 10)) {
        let n = 1_000_000u64;
        let chunks = 16u64;
        let maxima: Vec<f64> = (0..chunks)
            .into_par_iter()
            .flat_map_iter(|ch| {
                let mut r = stream_rng(opts.seed(10, 0), ch, 0);
                (0..n / chunks)
                    .map(|_| {
                        (0..4)
                            .map(|_| {
                                let s = sample_stationary_state(&model, &mut r);
                                sample_capacity(s, &model, &mut r)
                            })
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let (m, sd) = mean_std(&maxima);
        let se = sd / (maxima.len() as f64).sqrt();
        c.require(
            (analytic - m).abs() <= 3.0 * se,
            format!("K=4: by-state {analytic:.5} vs brute force {m:.5} +- {se:.5}, |z| = {:.2} (tol 3)", (analytic - m).abs() / se),
        );
    }

    for k in [20usize, 40] {
        let Some(exact) = c.attempt("by-state expectation", expected_capacity_by_state(k, &model, DEFAULT_PHI)) else { continue };
        let Some(mode) = c.attempt("mode bound", capacity_lower_bound_mode(k, &model)) else { continue };
        let deltas: Vec<DeltaBound> = (0..=k / 2 - 3).filter_map(|d| capacity_lower_bound_delta(k, &model, d).ok()).collect();
        let best = deltas.iter().map(|d| d.sum.max(d.last)).fold(0.0, f64::max);
        c.require(
            mode <= exact && best <= exact,
            format!("K={k}: mode bound {mode:.5}, best delta bound {best:.5} over {} deltas, expectation {exact:.5}", deltas.len()),
        );
    }
    c
}
