use super::common::*;
use gemac_core::dsched::{level_for_rate_exact, threshold_exact};
use gemac_core::evt::{expected_capacity_centralized, gumbel_cdf, norm_constants_mixture};
use gemac_core::qmodel2::p_coll_backlogged;
use gemac_core::sim::*;
use gemac_core::stats::{ks_test, poisson_chi_square};
use gemac_core::ChannelModel;
use rand_distr::{Distribution, Poisson};

fn queue_cfg(k: usize, lt: f64) -> SimConfig {
    SimConfig::new(
        k,
        ChannelModel::reference(),
        AttemptRule::Probability(1.0 / k as f64),
        Arrivals::BernoulliPerSlot(lt / k as f64),
    )
    .with_horizon(50_000)
    .with_replications(4)
    .with_seed(7)
}

fn mixture_cdf_oracle(x: f64, m: &ChannelModel) -> f64 {
    let p = m.beta / (m.alpha + m.beta);
    p * dd_norm_cdf((x - m.mu_g) / m.sigma_g) + (1.0 - p) * dd_norm_cdf((x - m.mu_b) / m.sigma_b)
}

#[test]
fn identical_seeds_give_identical_results() {
    let cfg = queue_cfg(5, 0.3);
    // Debug output of f64 round-trips, so equal strings mean equal bits (NaN included)
    let a = format!("{:?}", run_slotted(&cfg).unwrap());
    let b = format!("{:?}", run_slotted(&cfg).unwrap());
    assert_eq!(a, b);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = format!("{:?}", single.install(|| run_slotted(&cfg).unwrap()));
    assert_eq!(a, c);
    let d = format!("{:?}", run_slotted(&cfg.clone().with_seed(8)).unwrap());
    assert_ne!(a, d);
}

#[test]
fn flow_is_conserved() {
    for lt in [0.1, 0.3, 0.9] {
        assert!(run_slotted(&queue_cfg(4, lt)).unwrap().flow_conserved);
    }
    let cfg = SimConfig::new(3, ChannelModel::reference(), AttemptRule::Probability(0.4), Arrivals::PoissonRate(0.2))
        .with_horizon(20_000);
    assert!(run_slotted(&cfg).unwrap().flow_conserved);
}

#[test]
fn slots_split_into_idle_success_and_collision() {
    let r = run_slotted(&queue_cfg(6, 0.3)).unwrap();
    let total = r.throughput.mean + r.idle_slot_fraction.mean + r.collision_slot_fraction.mean;
    assert!((total - 1.0).abs() < 1e-12);

    let always = SimConfig::new(3, ChannelModel::reference(), AttemptRule::Probability(1.0), Arrivals::Saturated)
        .with_horizon(1000);
    let r = run_slotted(&always).unwrap();
    assert_eq!(r.collision_slot_fraction.mean, 1.0);
    assert_eq!(r.throughput.mean, 0.0);
    assert_eq!(r.success_prob.mean, 0.0);
}

#[test]
fn lone_user_never_collides() {
    let cfg = SimConfig::new(1, ChannelModel::reference(), AttemptRule::Probability(1.0), Arrivals::BernoulliPerSlot(0.5))
        .with_horizon(100_000);
    let r = run_slotted(&cfg).unwrap();
    assert_eq!(r.success_prob.mean, 1.0);
    assert_eq!(r.time_in_line.mean, 0.0);
    assert!((r.throughput.mean - 0.5).abs() < 0.01);
}

#[test]
fn half_width_shrinks_with_replications() {
    let base = queue_cfg(3, 0.2).with_horizon(10_000);
    let w = |reps: usize| run_slotted(&base.clone().with_replications(reps)).unwrap().mean_queue.half_width;
    let ratio = w(64) / w(16);
    assert!((ratio - 0.5).abs() <= 0.15, "ratio {ratio}");
}

#[test]
fn backlogged_collision_probability() {
    let m = ChannelModel::reference();
    let u = threshold_exact(100, &m).unwrap().u;
    let cfg = SimConfig::new(100, m, AttemptRule::Threshold(u), Arrivals::Saturated)
        .with_horizon(100_000)
        .with_seed(3);
    let r = run_slotted(&cfg).unwrap();
    let expect = p_coll_backlogged(100);
    assert!((r.collision_prob.mean - expect).abs() < 0.02, "{} vs {expect}", r.collision_prob.mean);
}

#[test]
fn single_user_maximum_is_the_mixture() {
    let m = ChannelModel::reference();
    let cfg = CapacityMaxConfig { k: 1, model: m, mode: CapacityMode::IIDMixture, slots: 5000, replications: 4, seed: 5, bins: 30 };
    let r = estimate_capacity_max(&cfg).unwrap();
    let fit = ks_test(&r.samples, |x| mixture_cdf_oracle(x, &m));
    assert!(fit.passes(0.01), "{fit:?}");
    assert_eq!(r.histogram.counts.iter().sum::<u64>(), 20_000);
}

#[test]
fn large_population_maximum_is_gumbel() {
    let m = ChannelModel::reference();
    let cfg = CapacityMaxConfig { k: 5000, model: m, mode: CapacityMode::IIDMixture, slots: 200, replications: 10, seed: 6, bins: 40 };
    let r = estimate_capacity_max(&cfg).unwrap();
    let g = norm_constants_mixture(5000, &m).unwrap();
    let fit = ks_test(&r.samples, |x| gumbel_cdf(x, &g));
    assert!(fit.passes(0.01), "{fit:?}");
}

#[test]
fn large_population_mean_matches_centralized_capacity() {
    let m = ChannelModel::reference();
    let cfg = CapacityMaxConfig { k: 5000, model: m, mode: CapacityMode::IIDMixture, slots: 200, replications: 10, seed: 7, bins: 40 };
    let r = estimate_capacity_max(&cfg).unwrap();
    let analytic = expected_capacity_centralized(5000, &m).unwrap();
    let se = r.std / (r.samples.len() as f64).sqrt();
    assert!((r.mean - analytic).abs() < 3.0 * se, "{analytic} vs {} ± {se}", r.mean);
}

fn gaussian_model() -> ChannelModel {
    ChannelModel::new(0.1, 0.1, 0.0, 1.0, -1.0, 0.5).unwrap()
}

#[test]
fn gaussian_exceedances_follow_values_table() {
    let n = 10_000;
    let tau = -(0.3961f64).ln();
    let level = level_for_rate_exact(tau, n, 0.0, 1.0).unwrap();
    let cfg = ExceedanceConfig { model: gaussian_model(), mode: CapacityMode::IIDGaussian, windows: 40_000, seed: 9 };
    let r = exceedance_counts(&cfg, level, n).unwrap();
    assert!((r.prob(0) - 0.3961).abs() < 0.01, "Pr(N=0) = {}", r.prob(0));
    assert!((r.prob(1) - 0.3668).abs() < 0.01, "Pr(N=1) = {}", r.prob(1));
    assert!(r.poisson_fit(tau).passes(0.01));
}

#[test]
fn high_level_has_no_exceedances() {
    let cfg = ExceedanceConfig { model: gaussian_model(), mode: CapacityMode::IIDGaussian, windows: 200, seed: 10 };
    let r = exceedance_counts(&cfg, 9.0, 1000).unwrap();
    assert_eq!(r.prob(0), 1.0);
}

#[test]
fn chain_dependent_exceedances_are_poisson() {
    let m = ChannelModel::reference();
    let n = 5000;
    let u = threshold_exact(n, &m).unwrap().u;
    let cfg = ExceedanceConfig { model: m, mode: CapacityMode::ChainDependent, windows: 10_000, seed: 11 };
    let r = exceedance_counts(&cfg, u, n).unwrap();
    let fit = r.poisson_fit(1.0);
    assert!(fit.passes(0.01), "{fit:?}, mean {}", r.mean_count);
}

#[test]
fn thinning_keeps_poisson_counts_poisson() {
    let mut r = rng(12);
    let (tau, keep) = (3.0, 0.4);
    let input = Poisson::new(tau).unwrap();
    let mut hist = vec![0u64; 1];
    for _ in 0..20_000 {
        let n = input.sample(&mut r) as usize;
        let events: Vec<usize> = (0..n).collect();
        let kept = thin_events(&events, keep, &mut r).unwrap().len();
        if kept >= hist.len() {
            hist.resize(kept + 1, 0);
        }
        hist[kept] += 1;
    }
    let fit = poisson_chi_square(&hist, keep * tau);
    assert!(fit.passes(0.01), "{fit:?}");

    let ev = vec![1, 2, 3];
    assert_eq!(thin_events(&ev, 1.0, &mut r).unwrap(), ev);
    assert!(thin_events(&ev, 0.0, &mut r).unwrap().is_empty());
    assert!(thin_events(&ev, 1.5, &mut r).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = queue_cfg(2, 0.1);
    cfg.warmup = cfg.horizon;
    assert!(run_slotted(&cfg).is_err());
    assert!(run_slotted(&queue_cfg(2, 0.1).with_replications(0)).is_err());
}
