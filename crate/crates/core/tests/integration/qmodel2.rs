use super::common::*;
use gemac_core::qmodel2::*;
use gemac_core::sim::{run_slotted, Arrivals, AttemptRule, SimConfig};
use gemac_core::stats::Estimate;
use gemac_core::{ChannelModel, Error};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Standard error recovered from a 95% replication interval.
fn se(e: &Estimate) -> f64 {
    let t = StudentsT::new(0.0, 1.0, (e.replications - 1) as f64).unwrap().inverse_cdf(0.975);
    e.half_width / t
}

fn exp_fixed_point_residual(p: f64, lambda: f64, tau: f64) -> f64 {
    (p - 1.0 + (-lambda / ((1.0 - p) * tau)).exp()).abs()
}

#[test]
fn backlogged_values() {
    assert_eq!(p_coll_backlogged(1), 0.0);
    assert_eq!(p_coll_backlogged(2), 0.5);
    assert!((p_coll_backlogged(3) - 5.0 / 9.0).abs() < 1e-15);
    let limit = 1.0 - (-1.0f64).exp();
    assert!((p_coll_backlogged(1_000_000) - limit).abs() < 1e-6);
    assert!((limit - 0.632121).abs() < 1e-6);
}

#[test]
fn no_traffic_no_collisions() {
    assert_eq!(solve_p_coll(0.0, 1.0, None).unwrap(), 0.0);
    assert_eq!(solve_p_coll(0.0, 0.01, Some(100)).unwrap(), 0.0);
}

#[test]
fn root_matches_bisection_oracle() {
    let (k, tau) = (50u64, 1.0);
    let lambda = 0.3 / k as f64 * k as f64;
    let p = solve_p_coll(lambda, tau, None).unwrap();
    let oracle = bisect_increasing(|x| x - 1.0 + (-lambda / ((1.0 - x) * tau)).exp(), 0.0, 0.5);
    assert!((p - oracle).abs() < 1e-10, "{p} vs {oracle}");
    assert!(exp_fixed_point_residual(p, lambda, tau) < 1e-12);
}

#[test]
fn smaller_root_is_selected() {
    // two roots exist below 1 − λ/τ; the stable one has map slope below one
    let (lambda, tau) = (0.25, 1.0);
    let p = solve_p_coll(lambda, tau, None).unwrap();
    let h = 1e-7;
    let slope = (p_coll_map(p + h, lambda, tau, None) - p_coll_map(p - h, lambda, tau, None)) / (2.0 * h);
    assert!(slope < 1.0);
    let other = bisect_increasing(|x| -(x - p_coll_map(x, lambda, tau, None)), p + 0.05, 1.0 - lambda / tau - 1e-9);
    assert!(other > p);
}

#[test]
fn overload_is_an_instability() {
    assert!(matches!(solve_p_coll(0.5, 1.0, None), Err(Error::Unstable(_))));
    assert!(matches!(solve_p_coll(2.0, 1.0, Some(10)), Err(Error::Unstable(_))));
    assert!(matches!(empty_prob(0.6, 1.0, 0.5), Err(Error::Unstable(_))));
}

#[test]
fn empty_probability() {
    assert_eq!(empty_prob(0.0, 0.3, 0.2).unwrap(), 1.0);
    let (tau, pc) = (0.8, 0.3);
    assert!((empty_prob(0.5 * (1.0 - pc) * tau, tau, pc).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn no_interference_reduces_to_plain_queue() {
    let q = DecoupledQueue { lambda: 0.3, tau: 0.5, p_coll: 0.0, k: None };
    let m = metrics_model2(&q).unwrap();
    let rho: f64 = 0.6;
    assert!((m.mean_queue - rho / (1.0 - rho)).abs() < 1e-14);
    assert!((m.service_time.unwrap() - 2.0).abs() < 1e-14);
    assert!((m.time_in_line.unwrap() - rho / (0.5 - 0.3)).abs() < 1e-12);
    assert!((m.delay.unwrap() - 1.0 / (0.5 - 0.3)).abs() < 1e-12);
    assert!(metrics_model2(&DecoupledQueue { lambda: 0.5, ..q }).is_err());
}

#[test]
fn waiting_time_diverges_near_the_boundary() {
    let k = 50;
    let light = metrics_model2(&solve_symmetric(k, 0.05).unwrap()).unwrap().time_in_line.unwrap();
    // walk the load up until the fixed point disappears
    let mut lt = 0.05;
    let mut last = light;
    while let Ok(q) = solve_symmetric(k, lt + 0.001) {
        lt += 0.001;
        last = metrics_model2(&q).unwrap().time_in_line.unwrap();
    }
    assert!(last > 10.0 * light, "light {light}, near boundary {last} at λ_T = {lt}");
}

#[test]
fn large_population_matches_exponential_form() {
    let k = 10_000u64;
    let tau = 1.0 / k as f64;
    for lt in [0.1, 0.2, 0.3] {
        let lambda = lt / k as f64;
        let finite = solve_p_coll(lambda, tau, Some(k)).unwrap();
        let inf = solve_p_coll(lambda, tau, None).unwrap();
        assert!((finite - inf).abs() < 1e-3, "λ_T={lt}: {finite} vs {inf}");
        assert!(exp_fixed_point_residual(inf, lambda, tau) < 1e-12);
    }
}

fn sim(k: usize, lt: f64, seed: u64) -> gemac_core::SimResult {
    let cfg = SimConfig::new(
        k,
        ChannelModel::reference(),
        AttemptRule::Probability(1.0 / k as f64),
        Arrivals::BernoulliPerSlot(lt / k as f64),
    )
    .with_horizon(1_000_000)
    .with_replications(10)
    .with_seed(seed);
    run_slotted(&cfg).unwrap()
}

#[test]
fn empty_fraction_matches_simulation() {
    let q = solve_symmetric(100, 0.2).unwrap();
    let analytic = empty_prob(q.lambda, q.tau, q.p_coll).unwrap();
    let s = sim(100, 0.2, 81);
    let e = &s.empty_fraction;
    assert!((e.mean - analytic).abs() <= 3.0 * se(e), "{analytic} vs {} ± {}", e.mean, se(e));
}

#[test]
fn service_time_matches_interdependent_queues() {
    for (k, seed) in [(20usize, 82u64), (50, 83), (100, 84)] {
        let m = metrics_model2(&solve_symmetric(k as u64, 0.3).unwrap()).unwrap();
        let s = sim(k, 0.3, seed);
        let (a, b) = (m.service_time.unwrap(), s.service_time.mean);
        assert!(rel(a, b) < 0.10, "K={k}: {a} vs {b}");
    }
}

proptest! {
    #[test]
    fn residual_and_backlogged_bound(k in 2u64..2000, load in 0.0..0.35f64) {
        let tau = 1.0 / k as f64;
        let lambda = load / k as f64;
        if let Ok(p) = solve_p_coll(lambda, tau, Some(k)) {
            prop_assert!((p - p_coll_map(p, lambda, tau, Some(k))).abs() < 1e-12);
            prop_assert!(p <= p_coll_backlogged(k) + 1e-12);
        }
        let p = solve_p_coll(lambda, tau, None).unwrap();
        prop_assert!(exp_fixed_point_residual(p, lambda, tau) < 1e-12);
    }

    #[test]
    fn monotone_in_load_and_rate(tau in 0.05..2.0f64, a in 0.0..0.3f64, b in 0.0..0.3f64) {
        let (l1, l2) = (a.min(b) * tau, a.max(b) * tau);
        prop_assert!(solve_p_coll(l1, tau, None).unwrap() <= solve_p_coll(l2, tau, None).unwrap() + 1e-12);
        let lambda = 0.2 * tau;
        prop_assert!(solve_p_coll(lambda, tau * 1.5, None).unwrap() <= solve_p_coll(lambda, tau, None).unwrap() + 1e-12);
    }
}
