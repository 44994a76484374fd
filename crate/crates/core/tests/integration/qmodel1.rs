use super::common::*;
use gemac_core::qmodel1::*;
use gemac_core::sim::{run_slotted, Arrivals, AttemptRule, SimConfig};
use gemac_core::{ChannelModel, Error};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn sym(k: usize, lambda: f64, p: f64) -> Vec<UserParams> {
    vec![UserParams { lambda, p }; k]
}

fn hetero(k: usize, seed: u64) -> (Vec<UserParams>, AuxProbs) {
    let mut r = rng(seed);
    let params: Vec<UserParams> =
        (0..k).map(|_| UserParams { lambda: r.random_range(0.01..0.4), p: r.random_range(0.05..0.95) }).collect();
    let aux = AuxProbs {
        p11: (0..k).map(|_| r.random_range(0.0..1.0)).collect(),
        p02: (0..k).map(|_| r.random_range(0.0..1.0)).collect(),
    };
    (params, aux)
}

/// Event-level slot: arrivals to idle users, attempts, collision, then the
/// winner's remaining backlog drawn from the queue summaries.
fn oracle_step(from: &StatusVector, params: &[UserParams], aux: &AuxProbs, r: &mut ChaCha8Rng) -> (StatusVector, Vec<bool>) {
    let k = from.0.len();
    let has: Vec<bool> = (0..k)
        .map(|i| from.0[i] != Status::Idle || r.random::<f64>() < params[i].lambda)
        .collect();
    let tx: Vec<bool> = (0..k).map(|i| has[i] && r.random::<f64>() < params[i].p).collect();
    let winners = tx.iter().filter(|&&t| t).count();
    let mut next = vec![Status::Idle; k];
    let mut won = vec![false; k];
    for i in 0..k {
        if !has[i] {
            continue;
        }
        if tx[i] && winners == 1 {
            won[i] = true;
            let more = match from.0[i] {
                Status::Idle => false,
                Status::Active => r.random::<f64>() < aux.p11[i],
                Status::Blocked => r.random::<f64>() >= aux.p02[i],
            };
            let busy = from.0[i] != Status::Idle;
            let arrival = busy && r.random::<f64>() < params[i].lambda;
            next[i] = if more || arrival { Status::Active } else { Status::Idle };
        } else {
            next[i] = Status::Blocked;
        }
    }
    (StatusVector(next), won)
}

fn row_sum(from: &StatusVector, states: &[StatusVector], params: &[UserParams], aux: &AuxProbs) -> f64 {
    states.iter().map(|to| status_transition_prob(from, to, params, aux)).sum()
}

#[test]
fn state_counts() {
    assert_eq!(enumerate_states(1).unwrap().len(), 3);
    assert_eq!(enumerate_states(2).unwrap().len(), 8);
    assert_eq!(enumerate_states(3).unwrap().len(), 20);
    assert!(enumerate_states(3).unwrap().iter().all(|s| s.is_valid()));
    assert!(matches!(enumerate_states(K_MAX + 1), Err(Error::TooLarge(_))));
}

#[test]
fn rows_sum_to_one_exhaustively_for_small_k() {
    for k in 1..=3 {
        for seed in 0..5 {
            let (params, aux) = hetero(k, 100 + seed);
            let states = enumerate_states(k).unwrap();
            for from in &states {
                assert!((row_sum(from, &states, &params, &aux) - 1.0).abs() < 1e-10, "K={k} from {from:?}");
            }
        }
    }
}

#[test]
fn sampled_rows_sum_to_one_up_to_seven_users() {
    for k in 4..=7 {
        let (params, aux) = hetero(k, 200 + k as u64);
        let states = enumerate_states(k).unwrap();
        let mut r = rng(k as u64);
        for _ in 0..25 {
            let from = &states[r.random_range(0..states.len())];
            assert!((row_sum(from, &states, &params, &aux) - 1.0).abs() < 1e-10, "K={k} from {from:?}");
        }
    }
}

#[test]
fn single_idle_user_stays_idle() {
    let params = sym(1, 0.3, 0.6);
    let aux = AuxProbs::initial(&params);
    let idle = StatusVector(vec![Status::Idle]);
    // no arrival, or an arrival sent successfully at once
    let expect = 0.7 + 0.3 * 0.6;
    assert!((status_transition_prob(&idle, &idle, &params, &aux) - expect).abs() < 1e-15);
    let blocked = StatusVector(vec![Status::Blocked]);
    assert!((status_transition_prob(&idle, &blocked, &params, &aux) - 0.3 * 0.4).abs() < 1e-15);
    let active = StatusVector(vec![Status::Active]);
    assert_eq!(status_transition_prob(&idle, &active, &params, &aux), 0.0);
}

#[test]
fn transitions_match_slot_oracle() {
    let trials = 1_000_000;
    for (k, seed) in [(2usize, 300u64), (3, 301)] {
        let (params, aux) = hetero(k, seed);
        let states = enumerate_states(k).unwrap();
        let mut r = rng(seed);
        for from in &states {
            let mut counts = vec![0u64; states.len()];
            for _ in 0..trials {
                let (to, _) = oracle_step(from, &params, &aux, &mut r);
                counts[states.iter().position(|s| *s == to).unwrap()] += 1;
            }
            for (to, &c) in states.iter().zip(&counts) {
                let p = status_transition_prob(from, to, &params, &aux);
                let sd = (p * (1.0 - p) / trials as f64).sqrt();
                let f = c as f64 / trials as f64;
                assert!((f - p).abs() <= 3.0 * sd + 1e-12, "{from:?} -> {to:?}: {f} vs {p}");
            }
        }
    }
}

#[test]
fn stationary_examples() {
    let idle_only = sym(1, 0.0, 0.5);
    let d = status_stationary(&idle_only, &AuxProbs::initial(&idle_only)).unwrap();
    assert_eq!(d.prob(&StatusVector(vec![Status::Idle])), 1.0);

    let params = sym(2, 0.2, 0.5);
    let aux = AuxProbs::initial(&params);
    let d = status_stationary(&params, &aux).unwrap();
    for s in enumerate_states(2).unwrap() {
        let swapped = StatusVector(vec![s.0[1], s.0[0]]);
        assert!((d.prob(&s) - d.prob(&swapped)).abs() < 1e-12);
    }
    assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

/// Long run of the oracle chain; returns occupancy and per-status success counts for user 0.
fn oracle_run(params: &[UserParams], aux: &AuxProbs, slots: usize, seed: u64) -> (Vec<Vec<f64>>, [[u64; 2]; 3]) {
    let k = params.len();
    let states = enumerate_states(k).unwrap();
    let mut r = rng(seed);
    let mut s = StatusVector(vec![Status::Idle; k]);
    let batches = 50;
    let per = slots / batches;
    let mut occ = vec![vec![0.0; states.len()]; batches];
    let mut succ = [[0u64; 2]; 3];
    for _ in 0..10_000 {
        s = oracle_step(&s, params, aux, &mut r).0;
    }
    for b in 0..batches {
        for _ in 0..per {
            occ[b][states.iter().position(|x| *x == s).unwrap()] += 1.0 / per as f64;
            let idle = s.0[0] == Status::Idle;
            let (next, won) = oracle_step(&s, params, aux, &mut r);
            // idle users count only in slots where a packet arrived
            let eligible = !idle || next.0[0] != Status::Idle || won[0];
            if eligible {
                let x = s.0[0] as usize;
                succ[x][0] += 1;
                succ[x][1] += u64::from(won[0]);
            }
            s = next;
        }
    }
    (occ, succ)
}

#[test]
fn stationary_and_success_match_oracle_chain() {
    let params = sym(2, 0.05, 0.5);
    let sol = solve_model1(&params, 1e-10, 500).unwrap();
    let d = status_stationary(&params, &sol.aux).unwrap();
    let (occ, succ) = oracle_run(&params, &sol.aux, 20_000_000, 43);
    let states = enumerate_states(2).unwrap();
    for (j, s) in states.iter().enumerate() {
        let xs: Vec<f64> = occ.iter().map(|b| b[j]).collect();
        let (mean, se) = mean_and_se(&xs);
        assert!((mean - d.prob(s)).abs() <= 3.0 * se + 1e-12, "{s:?}: {mean} ± {se} vs {}", d.prob(s));
    }
    let sp = success_probs(&d, &params).unwrap();
    for (x, analytic) in [(0, sp.p_i[0]), (1, sp.p_a[0]), (2, sp.p_b[0])] {
        let [n, w] = succ[x];
        let f = w as f64 / n as f64;
        let sd = (analytic * (1.0 - analytic) / n as f64).sqrt();
        assert!((f - analytic).abs() <= 3.0 * sd, "status {x}: {f} vs {analytic} over {n}");
    }
}

#[test]
fn success_probability_reductions() {
    let params = sym(1, 0.2, 0.35);
    let sol = solve_model1(&params, 1e-10, 500).unwrap();
    assert!((sol.success.p_b[0] - 0.35).abs() < 1e-12);
    assert!((sol.success.p_a[0] - 0.35).abs() < 1e-12);
    assert!((sol.success.p_i[0] - 0.35).abs() < 1e-12);

    let sol = solve_model1(&sym(3, 0.08, 0.3), 1e-10, 500).unwrap();
    for v in [&sol.success.p_i, &sol.success.p_a, &sol.success.p_b] {
        assert!((v[0] - v[1]).abs() < 1e-9 && (v[1] - v[2]).abs() < 1e-9);
    }
}

#[test]
fn degenerate_status_is_reported() {
    let params = sym(2, 0.0, 0.5);
    let d = status_stationary(&params, &AuxProbs::initial(&params)).unwrap();
    assert!(matches!(success_probs(&d, &params), Err(Error::Degenerate(_))));
}

#[test]
fn queue_steady_limits_and_errors() {
    let q = queue_steady_user(0.5, 0.5, 0.5, 1e-9).unwrap();
    assert!((q.pi10 - 1.0).abs() < 1e-8 && q.pi00 < 1e-8 && q.g0 < 1e-8);
    assert!(matches!(queue_steady_user(0.5, 0.5, 0.1, 0.9), Err(Error::Unstable(_))));
    assert!(matches!(queue_steady_user(1.0, 0.1, 0.1, 0.9), Err(Error::Unstable(_))));
}

#[test]
fn aux_update_boundaries() {
    let q = QueueSteady { pi00: 0.1, pi10: 0.5, pi11: 0.2, g0: 0.3, g1: 0.7, active: 0.2 };
    let (p11, _) = aux_update(&q).unwrap();
    assert!(p11.abs() < 1e-15);
    let q = QueueSteady { pi00: 0.3, pi10: 0.5, pi11: 0.1, g0: 0.3, g1: 0.7, active: 0.2 };
    let (_, p02) = aux_update(&q).unwrap();
    assert_eq!(p02, 1.0);
    let q = QueueSteady { pi00: 0.0, pi10: 0.5, pi11: 0.1, g0: 0.0, g1: 1.0, active: 0.5 };
    assert!(aux_update(&q).is_err());
}

#[test]
fn converged_point_reproduces_itself() {
    let params = vec![
        UserParams { lambda: 0.05, p: 0.3 },
        UserParams { lambda: 0.1, p: 0.4 },
        UserParams { lambda: 0.02, p: 0.5 },
    ];
    let sol = solve_model1(&params, 1e-10, 500).unwrap();
    let d = status_stationary(&params, &sol.aux).unwrap();
    let sp = success_probs(&d, &params).unwrap();
    let lambdas: Vec<f64> = params.iter().map(|u| u.lambda).collect();
    let qs = queue_steady(&sp, &lambdas).unwrap();
    for (i, q) in qs.iter().enumerate() {
        let (p11, p02) = aux_update(q).unwrap();
        assert!((p11 - sol.aux.p11[i]).abs() < 1e-8 && (p02 - sol.aux.p02[i]).abs() < 1e-8);
        assert!((q.pi10 - sol.queues[i].pi10).abs() < 1e-8);
    }
}

#[test]
fn queue_fractions_match_event_level_queues() {
    // real queues for two users; summaries read at the start of each slot
    let params = sym(2, 0.05, 0.5);
    let sol = solve_model1(&params, 1e-10, 500).unwrap();
    let q = sol.queues[0];
    let mut r = rng(42);
    let (mut len, mut st) = ([0usize; 2], [Status::Idle; 2]);
    let batches = 50;
    let per = 20_000;
    let mut fr = vec![[0.0f64; 3]; batches];
    for b in 0..batches {
        for _ in 0..per {
            fr[b][0] += f64::from(st[0] == Status::Blocked) / per as f64;
            fr[b][1] += f64::from(st[0] == Status::Idle) / per as f64;
            fr[b][2] += f64::from(st[0] == Status::Active && len[0] == 1) / per as f64;
            for l in len.iter_mut() {
                *l += usize::from(r.random::<f64>() < 0.05);
            }
            let tx: Vec<bool> = len.iter().map(|&l| l > 0 && r.random::<f64>() < 0.5).collect();
            let n = tx.iter().filter(|&&t| t).count();
            for i in 0..2 {
                st[i] = if len[i] == 0 {
                    Status::Idle
                } else if tx[i] && n == 1 {
                    len[i] -= 1;
                    if len[i] > 0 { Status::Active } else { Status::Idle }
                } else {
                    Status::Blocked
                };
            }
        }
    }
    for (x, analytic) in [(0, q.g0), (1, q.pi10), (2, q.pi11)] {
        let xs: Vec<f64> = fr.iter().map(|b| b[x]).collect();
        let (mean, se) = mean_and_se(&xs);
        assert!((mean - analytic).abs() <= 3.0 * se, "summary {x}: {mean} ± {se} vs {analytic}");
    }
}

#[test]
fn no_traffic_converges_immediately() {
    let sol = solve_model1(&sym(3, 0.0, 0.4), 1e-8, 500).unwrap();
    assert!(sol.iterations <= 2);
    let m = metrics_model1(&sol);
    assert!(m.per_user.iter().all(|u| u.mean_queue == 0.0 && u.time_in_line.is_none()));
    assert!(m.system_delay.is_none());
}

#[test]
fn light_traffic_limits() {
    for p in [0.5, 0.999] {
        let sol = solve_model1(&sym(1, 1e-7, p), 1e-12, 500).unwrap();
        let u = metrics_model1(&sol).per_user[0];
        assert!(u.mean_queue < 1e-6);
        // a lone packet waits a geometric number of slots before its first attempt
        assert!((u.service_time.unwrap() - (1.0 - p) / p).abs() < 1e-5);
    }
}

#[test]
fn symmetric_users_share_metrics() {
    let sol = solve_model1(&sym(4, 0.05, 0.25), 1e-10, 500).unwrap();
    let m = metrics_model1(&sol);
    for u in &m.per_user[1..] {
        assert!((u.mean_queue - m.per_user[0].mean_queue).abs() < 1e-9);
        assert!((u.success_prob.unwrap() - m.per_user[0].success_prob.unwrap()).abs() < 1e-9);
    }
    let d = m.per_user[0].delay.unwrap();
    assert!((m.system_delay.unwrap() - d).abs() < 1e-9);
    assert!((d - m.per_user[0].time_in_line.unwrap() - m.per_user[0].service_time.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn throughput_balances_arrivals() {
    for (k, lt) in [(2usize, 0.15), (4, 0.2), (6, 0.3)] {
        let sol = solve_model1(&symmetric_params(k, lt), 1e-10, 500).unwrap();
        let (sp, q, l) = (&sol.success, sol.queues[0], lt / k as f64);
        let rate = sp.p_a[0] * q.active + l * sp.p_i[0] * q.pi10 + sp.p_b[0] * q.g0;
        assert!(rel(rate, l) < 0.02, "K={k}: {rate} vs {l}");
    }
}

#[test]
fn model_too_large() {
    assert!(matches!(solve_model1(&sym(11, 0.01, 0.1), 1e-8, 10), Err(Error::TooLarge(_))));
}

fn compare_with_sim(k: usize, lt: f64, seed: u64) -> Vec<String> {
    let sol = solve_model1(&symmetric_params(k, lt), 1e-8, 500).unwrap();
    let u = metrics_model1(&sol).per_user[0];
    let cfg = SimConfig::new(
        k,
        ChannelModel::reference(),
        AttemptRule::Probability(1.0 / k as f64),
        Arrivals::BernoulliPerSlot(lt / k as f64),
    )
    .with_horizon(1_000_000)
    .with_replications(4)
    .with_seed(seed);
    let s = run_slotted(&cfg).unwrap();
    let mut bad = Vec::new();
    let checks = [
        ("mean queue", u.mean_queue, s.mean_queue_unblocked.mean),
        ("time in line", u.time_in_line.unwrap(), s.time_in_line.mean),
        ("service time", u.service_time.unwrap(), s.service_time.mean - 1.0),
    ];
    for (name, a, b) in checks {
        if rel(a, b) > 0.10 {
            bad.push(format!("K={k} λ_T={lt} {name}: model {a:.4}, sim {b:.4}"));
        }
    }
    let (a, b) = (u.success_prob.unwrap(), s.success_prob.mean);
    if (a - b).abs() > 0.03 {
        bad.push(format!("K={k} λ_T={lt} success: model {a:.4}, sim {b:.4}"));
    }
    bad
}

#[test]
fn agrees_with_simulation_for_two_users() {
    let bad = compare_with_sim(2, 0.15, 51);
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn agrees_with_simulation_for_seven_users() {
    let bad = compare_with_sim(7, 0.15, 52);
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn agrees_with_simulation_away_from_saturation() {
    let mut bad = Vec::new();
    for k in 2..=7 {
        for lt in [0.15, 0.2, 0.3] {
            bad.extend(compare_with_sim(k, lt, 60 + k as u64));
        }
    }
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn success_probability_near_saturation() {
    let lt = (1.0 - 0.001) / std::f64::consts::E;
    for k in 2..=10 {
        let bad: Vec<String> = compare_with_sim(k, lt, 70 + k as u64)
            .into_iter()
            .filter(|m| m.contains("success"))
            .collect();
        assert!(bad.is_empty(), "{bad:#?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blocked_and_unblocked_partition(p_i in 0.05..1.0f64, p_a in 0.05..1.0f64, p_b in 0.3..1.0f64, lambda in 0.0..0.2f64) {
        if let Ok(q) = queue_steady_user(p_i, p_a, p_b, lambda) {
            prop_assert!((q.g0 + q.g1 - 1.0).abs() < 1e-10);
            for v in [q.pi00, q.pi10, q.pi11, q.g0, q.g1] {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            }
        }
    }

    #[test]
    fn random_rows_sum_to_one(seed in 0u64..1000, k in 1usize..=4) {
        let (params, aux) = hetero(k, seed);
        let states = enumerate_states(k).unwrap();
        for from in &states {
            prop_assert!((row_sum(from, &states, &params, &aux) - 1.0).abs() < 1e-10);
        }
    }
}
