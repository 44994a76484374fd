//! One function per subcommand, each returning plot-ready rows.

use crate::args::*;
use crate::config::{resolve_channel, FileConfig};
use crate::error::CliError;
use crate::sweep::Sweep;
use crate::table::{Cell, Table};
use gemac_core::channel::mixture_sf;
use gemac_core::dsched::*;
use gemac_core::evt::*;
use gemac_core::groups::*;
use gemac_core::numerics::norm_sf;
use gemac_core::qmodel1::{metrics_model1, solve_model1, symmetric_params};
use gemac_core::qmodel2::{metrics_model2, solve_symmetric};
use gemac_core::qmodel3::solve_model3_symmetric;
use gemac_core::sim::*;
use gemac_core::stats::mean_std;
use gemac_core::ChannelModel;
use rayon::prelude::*;
use serde_json::Value;

pub const DEFAULT_SEED: u64 = 1;

pub enum Output {
    Table(Table),
    Json(Value),
}

fn counts(s: &Sweep) -> Result<Vec<u64>, CliError> {
    s.counts().map_err(|e| CliError::Usage(format!("K sweep: {e}")))
}

fn rel_err(model: f64, sim: f64) -> f64 {
    (model - sim).abs() / sim.abs()
}

/// Runs the closure over every point in parallel, keeping sweep order and
/// failing with the first error in that order.
fn par_rows<P, F>(points: &[P], f: F) -> Result<Vec<Vec<Cell>>, CliError>
where
    P: Sync,
    F: Fn(usize, &P) -> Result<Vec<Cell>, CliError> + Sync + Send,
{
    let rows: Vec<Result<Vec<Cell>, CliError>> = points.par_iter().enumerate().map(|(i, p)| f(i, p)).collect();
    rows.into_iter().collect()
}

fn max_mean_se(k: usize, model: &ChannelModel, slots: u64, reps: usize, seed: u64) -> Result<(f64, f64), CliError> {
    if reps < 2 {
        return Err(CliError::Usage("simulation needs at least two replications".into()));
    }
    let cfg = CapacityMaxConfig { k, model: *model, mode: CapacityMode::ChainDependent, slots, replications: reps, seed, bins: 40 };
    let r = estimate_capacity_max(&cfg)?;
    // slots within a replication are correlated, so the error comes from replication means
    let means: Vec<f64> = r.samples.chunks(slots as usize).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let (m, sd) = mean_std(&means);
    Ok((m, sd / (reps as f64).sqrt()))
}

pub fn capacity(a: &CapacityArgs, file: &FileConfig, seed: u64) -> Result<Table, CliError> {
    let s = &file.capacity;
    let model = resolve_channel(&a.channel, &file.channel)?;
    let ks = counts(&a.k.clone().or(s.k.clone()).unwrap_or(Sweep(vec![10.0, 100.0, 1000.0, 10000.0])))?;
    let simulate = a.simulate || s.simulate.unwrap_or(false);
    let slots = a.slots.or(s.slots).unwrap_or(1000);
    let reps = a.replications.or(s.replications).unwrap_or(8);
    let (p_good, _) = gemac_core::channel::stationary_state_probs(&model)?;

    let mut cols = vec![
        "k", "p_good", "a_k", "b_k", "centralized", "good_only", "threshold_asymptotic", "threshold_exact", "distributed",
        "distributed_finite", "ratio",
    ];
    if simulate {
        cols.extend(["sim_max_mean", "sim_max_se"]);
    }
    let mut t = Table::new(&cols);
    t.rows = par_rows(&ks, |i, &k| {
        let g = norm_constants_mixture(k, &model)?;
        let central = gumbel_mean(&g);
        let d = expected_capacity_distributed(k, &model)?;
        let mut row: Vec<Cell> = vec![
            k.into(),
            p_good.into(),
            g.a.into(),
            g.b.into(),
            central.into(),
            expected_capacity_good_only(k, &model).ok().into(),
            threshold_asymptotic(k, &model)?.u.into(),
            threshold_exact(k, &model)?.u.into(),
            d.capacity.into(),
            d.capacity_finite.into(),
            (d.capacity / central).into(),
        ];
        if simulate {
            let (m, se) = max_mean_se(k as usize, &model, slots, reps, seed.wrapping_add(i as u64))?;
            row.extend([m.into(), se.into()]);
        }
        Ok(row)
    })?;
    Ok(t)
}

pub fn threshold(a: &ThresholdArgs, file: &FileConfig) -> Result<Table, CliError> {
    let model = resolve_channel(&a.channel, &file.channel)?;
    let ks = counts(&a.k.clone().or(file.threshold.k.clone()).unwrap_or(Sweep(vec![10.0, 100.0, 1000.0, 10000.0])))?;
    let mut t = Table::new(&["k", "method", "u", "exceed_prob", "target"]);
    let gauss = |u: f64| norm_sf((u - model.mu_g) / model.sigma_g);
    for &k in &ks {
        let target = 1.0 / k as f64;
        let rows = [
            ("asymptotic", threshold_asymptotic(k, &model)?.u, &mixture_sf as &dyn Fn(f64, &ChannelModel) -> f64),
            ("exact", threshold_exact(k, &model)?.u, &mixture_sf),
        ];
        for (name, u, sf) in rows {
            t.push(vec![k.into(), name.into(), u.into(), sf(u, &model).into(), target.into()]);
        }
        // the refined constructions treat the population as good-state Gaussian
        let refined = threshold_refined_gaussian(k, model.mu_g, model.sigma_g)?.u;
        let expanded = threshold_refined_expanded(k, model.mu_g, model.sigma_g);
        t.push(vec![k.into(), "refined".into(), refined.into(), gauss(refined).into(), target.into()]);
        t.push(vec![k.into(), "expanded".into(), expanded.into(), gauss(expanded).into(), target.into()]);
    }
    Ok(t)
}

pub fn groups(a: &GroupsArgs, file: &FileConfig, seed: u64) -> Result<Table, CliError> {
    let s = &file.groups;
    let model = resolve_channel(&a.channel, &file.channel)?;
    let ks: Vec<usize> = counts(&a.k.clone().or(s.k.clone()).unwrap_or(Sweep(vec![4.0, 10.0, 20.0, 40.0, 100.0])))?
        .into_iter()
        .map(|k| k as usize)
        .collect();
    let phi = a.phi.or(s.phi).unwrap_or(DEFAULT_PHI);
    let delta = a.delta.or(s.delta).unwrap_or(2);
    let export = a.export.or(s.export).unwrap_or_default();
    let simulate = a.simulate || s.simulate.unwrap_or(false);
    let slots = a.slots.or(s.slots).unwrap_or(500);
    let reps = a.replications.or(s.replications).unwrap_or(8);

    match export {
        GroupsExport::Stationary => {
            let mut t = Table::new(&["k", "bad_users", "prob"]);
            for &k in &ks {
                let pi = stationary_chain(&transition_matrix(k, model.alpha, model.beta)?)?;
                for (i, p) in pi.into_iter().enumerate() {
                    t.push(vec![k.into(), i.into(), p.into()]);
                }
            }
            Ok(t)
        }
        GroupsExport::Matrix => {
            let mut t = Table::new(&["k", "from", "to", "prob"]);
            for &k in &ks {
                let c = transition_matrix(k, model.alpha, model.beta)?;
                for i in 0..c.n() {
                    for j in 0..c.n() {
                        t.push(vec![k.into(), i.into(), j.into(), c.get(i, j).into()]);
                    }
                }
            }
            Ok(t)
        }
        GroupsExport::Summary => {
            let mut cols = vec!["k", "by_state", "centralized", "mode_bound", "delta", "delta_sum", "delta_last"];
            if simulate {
                cols.extend(["sim_mean", "sim_se"]);
            }
            let mut t = Table::new(&cols);
            for (i, &k) in ks.iter().enumerate() {
                let by_state = expected_capacity_by_state(k, &model, phi)?;
                let central = expected_capacity_centralized(k as u64, &model).ok();
                // both bounds exist only for even K with alpha == beta
                let mode = capacity_lower_bound_mode(k, &model).ok();
                let db = capacity_lower_bound_delta(k, &model, delta).ok();
                let mut row: Vec<Cell> = vec![
                    k.into(),
                    by_state.into(),
                    central.into(),
                    mode.into(),
                    delta.into(),
                    db.map(|d| d.sum).into(),
                    db.map(|d| d.last).into(),
                ];
                if simulate {
                    let (m, se) = max_mean_se(k, &model, slots, reps, seed.wrapping_add(i as u64))?;
                    row.extend([m.into(), se.into()]);
                }
                t.push(row);
            }
            Ok(t)
        }
    }
}

/// Model III simulation: state switching and per-state attempts at the given rates per slot.
pub fn model3_sim_config(k: usize, lambda_t: f64, rate_g: f64, rate_b: f64, alpha: f64, beta: f64) -> Result<SimConfig, CliError> {
    let kf = k as f64;
    let to_prob = |r: f64| 1.0 - (-r).exp();
    let chain = ChannelModel::new(to_prob(alpha), to_prob(beta), 1.0, 1.0, 0.0, 1.0)?;
    let rule = AttemptRule::PerState { good: to_prob(rate_g / kf), bad: to_prob(rate_b / kf) };
    Ok(SimConfig::new(k, chain, rule, Arrivals::PoissonRate(lambda_t / kf)))
}

/// Bernoulli arrivals and attempt probability 1/K, as assumed by models I and II.
pub fn aloha_sim_config(k: usize, lambda_t: f64) -> SimConfig {
    SimConfig::new(
        k,
        ChannelModel::reference(),
        AttemptRule::Probability(1.0 / k as f64),
        Arrivals::BernoulliPerSlot(lambda_t / k as f64),
    )
}

pub fn queueing(a: &QueueingArgs, file: &FileConfig, seed: u64) -> Result<Table, CliError> {
    let s = &file.queueing;
    let model = a.model.or(s.model).unwrap_or(QModel::Model1);
    let simulate = a.simulate || s.simulate.unwrap_or(false);
    let horizon = a.horizon.or(s.horizon).unwrap_or(1_000_000);
    let reps = a.replications.or(s.replications).unwrap_or(4);
    let tol = a.tol.or(s.tol).unwrap_or(1e-10);
    let ch = resolve_channel(&a.channel, &file.channel)?;
    let (rate_g, rate_b) = (a.rate_g.or(s.rate_g).unwrap_or(0.7), a.rate_b.or(s.rate_b).unwrap_or(0.5));

    let (def_k, def_l) = match model {
        QModel::Model1 => ("2:10:1", vec![(-1.0f64).exp() * (1.0 - 0.001)]),
        QModel::Model2 => ("20,50,100", vec![0.3]),
        QModel::Model3 => ("50,100,200", vec![0.1, 0.3]),
    };
    let ks = counts(&a.k.clone().or(s.k.clone()).unwrap_or_else(|| def_k.parse().expect("default sweep")))?;
    let lts = a.lambda_t.clone().or(s.lambda_t.clone()).unwrap_or(Sweep(def_l)).0;
    if lts.iter().any(|l| !(*l >= 0.0)) {
        return Err(CliError::Usage("lambda_t must be nonnegative".into()));
    }
    let points: Vec<(u64, f64)> = lts.iter().flat_map(|&l| ks.iter().map(move |&k| (k, l))).collect();
    let sim_cfg = |cfg: SimConfig, i: usize| cfg.with_horizon(horizon).with_replications(reps).with_seed(seed.wrapping_add(i as u64));

    // (analytic columns, simulated counterparts compared in rel_err_*)
    let (cols, compared): (Vec<&str>, Vec<&str>) = match model {
        QModel::Model1 => (
            vec!["k", "lambda_t", "lambda", "p", "success_prob", "mean_queue", "time_in_line", "service_time", "delay", "iterations"],
            vec!["success_prob", "mean_queue", "time_in_line", "service_time"],
        ),
        QModel::Model2 => (
            vec!["k", "lambda_t", "lambda", "tau", "p_coll", "p_succ", "service_time", "wait", "queue_len"],
            vec!["p_succ", "service_time", "wait"],
        ),
        QModel::Model3 => (
            vec!["k", "lambda_t", "lambda", "mu_g", "mu_b", "alpha", "beta", "p_succ", "mean_queue", "wait", "pi_g0", "pi_b0", "z0"],
            vec!["p_succ", "mean_queue", "wait", "pi_g0", "pi_b0"],
        ),
    };
    let mut header: Vec<String> = cols.iter().map(|c| c.to_string()).collect();
    if simulate {
        header.extend(compared.iter().map(|c| format!("sim_{c}")));
        header.extend(compared.iter().map(|c| format!("rel_err_{c}")));
    }
    let mut t = Table::new(&header);

    t.rows = par_rows(&points, |i, &(k, lt)| {
        let kf = k as f64;
        let (mut row, analytic, sim): (Vec<Cell>, Vec<f64>, Option<Vec<f64>>) = match model {
            QModel::Model1 => {
                let params = symmetric_params(k as usize, lt);
                let sol = solve_model1(&params, tol.max(1e-12), 2000)?;
                let u = metrics_model1(&sol).per_user[0];
                let v = [u.success_prob, Some(u.mean_queue), u.time_in_line, u.service_time].map(|x| x.unwrap_or(f64::NAN));
                let row = vec![
                    k.into(),
                    lt.into(),
                    params[0].lambda.into(),
                    params[0].p.into(),
                    u.success_prob.into(),
                    u.mean_queue.into(),
                    u.time_in_line.into(),
                    u.service_time.into(),
                    u.delay.into(),
                    sol.iterations.into(),
                ];
                let sim = if simulate {
                    let r = run_slotted(&sim_cfg(aloha_sim_config(k as usize, lt), i))?;
                    Some(vec![r.success_prob.mean, r.mean_queue_unblocked.mean, r.time_in_line.mean, r.service_time.mean - 1.0])
                } else {
                    None
                };
                (row, v.to_vec(), sim)
            }
            QModel::Model2 => {
                let q = solve_symmetric(k, lt)?;
                let m = metrics_model2(&q)?;
                let v = vec![1.0 - q.p_coll, m.service_time.unwrap_or(f64::NAN), m.time_in_line.unwrap_or(f64::NAN)];
                let row = vec![
                    k.into(),
                    lt.into(),
                    q.lambda.into(),
                    q.tau.into(),
                    q.p_coll.into(),
                    (1.0 - q.p_coll).into(),
                    m.service_time.into(),
                    m.time_in_line.into(),
                    m.mean_queue.into(),
                ];
                let sim = if simulate {
                    let r = run_slotted(&sim_cfg(aloha_sim_config(k as usize, lt), i))?;
                    Some(vec![r.success_prob.mean, r.service_time.mean, r.time_in_line.mean])
                } else {
                    None
                };
                (row, v, sim)
            }
            QModel::Model3 => {
                let s3 = solve_model3_symmetric(k, lt, rate_g, rate_b, ch.alpha, ch.beta, tol)?;
                let wait = s3.wait.unwrap_or(0.0);
                let v = vec![s3.p_succ, s3.mean_queue, wait, s3.pi_g0, s3.pi_b0];
                let row = vec![
                    k.into(),
                    lt.into(),
                    (lt / kf).into(),
                    (rate_g / kf).into(),
                    (rate_b / kf).into(),
                    ch.alpha.into(),
                    ch.beta.into(),
                    s3.p_succ.into(),
                    s3.mean_queue.into(),
                    s3.wait.into(),
                    s3.pi_g0.into(),
                    s3.pi_b0.into(),
                    s3.z0.into(),
                ];
                let sim = if simulate {
                    let cfg = model3_sim_config(k as usize, lt, rate_g, rate_b, ch.alpha, ch.beta)?;
                    let r = run_slotted(&sim_cfg(cfg, i))?;
                    Some(vec![r.success_prob.mean, r.mean_queue.mean, r.sojourn.mean, r.empty_good.mean, r.empty_bad.mean])
                } else {
                    None
                };
                (row, v, sim)
            }
        };
        if let Some(sim) = sim {
            row.extend(sim.iter().map(|&x| Cell::from(x)));
            row.extend(analytic.iter().zip(&sim).map(|(&m, &s)| Cell::from(rel_err(m, s))));
        }
        Ok(row)
    })?;
    Ok(t)
}

pub fn simulate(a: &SimulateArgs, file: &FileConfig, seed: u64) -> Result<SimResult, CliError> {
    let s = &file.simulate;
    let model = resolve_channel(&a.channel, &file.channel)?;
    let k = a.k.or(s.k).unwrap_or(10);
    if k == 0 {
        return Err(CliError::Usage("K must be positive".into()));
    }
    let attempt = match a.attempt.or(s.attempt).unwrap_or(AttemptKind::Exact) {
        AttemptKind::Exact => threshold_exact(k as u64, &model)?.into(),
        AttemptKind::Asymptotic => threshold_asymptotic(k as u64, &model)?.into(),
        AttemptKind::Probability => AttemptRule::Probability(a.p.or(s.p).unwrap_or(1.0 / k as f64)),
    };
    let lt = a.lambda_t.or(s.lambda_t).unwrap_or(0.3);
    let arrivals = match a.arrivals.or(s.arrivals).unwrap_or(ArrivalKind::Bernoulli) {
        ArrivalKind::Bernoulli => Arrivals::BernoulliPerSlot(lt / k as f64),
        ArrivalKind::Poisson => Arrivals::PoissonRate(lt / k as f64),
        ArrivalKind::Saturated => Arrivals::Saturated,
    };
    let mode = match a.mode.or(s.mode).unwrap_or(ModeKind::Chain) {
        ModeKind::Chain => CapacityMode::ChainDependent,
        ModeKind::Mixture => CapacityMode::IIDMixture,
        ModeKind::Gaussian => CapacityMode::IIDGaussian,
    };
    let mut cfg = SimConfig::new(k, model, attempt, arrivals)
        .with_horizon(a.horizon.or(s.horizon).unwrap_or(100_000))
        .with_replications(a.replications.or(s.replications).unwrap_or(4))
        .with_seed(seed)
        .with_capacity_mode(mode);
    if let Some(w) = a.warmup.or(s.warmup) {
        cfg.warmup = w;
    }
    Ok(run_slotted(&cfg)?)
}

/// One row per estimated metric.
pub fn sim_table(r: &SimResult) -> Table {
    let mut t = Table::new(&["metric", "mean", "half_width", "replications"]);
    let metrics = [
        ("mean_queue", &r.mean_queue),
        ("mean_queue_slot_start", &r.mean_queue_slot_start),
        ("mean_queue_unblocked", &r.mean_queue_unblocked),
        ("time_in_line", &r.time_in_line),
        ("service_time", &r.service_time),
        ("sojourn", &r.sojourn),
        ("success_prob", &r.success_prob),
        ("collision_prob", &r.collision_prob),
        ("throughput", &r.throughput),
        ("idle_slot_fraction", &r.idle_slot_fraction),
        ("collision_slot_fraction", &r.collision_slot_fraction),
        ("attempt_rate", &r.attempt_rate),
        ("empty_fraction", &r.empty_fraction),
        ("empty_good", &r.empty_good),
        ("empty_bad", &r.empty_bad),
        ("max_capacity", &r.max_capacity),
    ];
    for (name, e) in metrics {
        t.push(vec![name.into(), e.mean.into(), e.half_width.into(), e.replications.into()]);
    }
    t
}
