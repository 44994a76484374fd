use super::common::*;
use gemac_core::channel::{mixture_sf, stationary_state_probs};
use gemac_core::evt::*;
use gemac_core::numerics::EULER_GAMMA;
use gemac_core::ChannelModel;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{PI, SQRT_2};
use twofloat::TwoFloat;

fn fig_model() -> ChannelModel {
    ChannelModel::new(0.1, 0.1, SQRT_2, 0.5, 0.0, 0.3).unwrap()
}

fn good_only(mu: f64, sigma: f64) -> ChannelModel {
    ChannelModel::new(0.0, 0.5, mu, sigma, mu - 1.0, sigma / 2.0).unwrap()
}

/// Textbook constants for the maximum of n standard normals.
fn standard_constants(n: f64) -> (f64, f64) {
    let l = (2.0 * n.ln()).sqrt();
    (l, l - (n.ln().ln() + (4.0 * PI).ln()) / (2.0 * l))
}

/// The same closed form in double-double arithmetic.
fn dd_constants(k: u64, p: f64, mu: f64, sigma: f64) -> (f64, f64) {
    let lnk = TwoFloat::from((k as f64).ln());
    let l = (lnk * 2.0).sqrt();
    let lnlnk = TwoFloat::from(lnk.hi().ln()) + lnk.lo() / lnk.hi();
    let c = TwoFloat::from((4.0 * PI / (p * p)).ln());
    let a = l / sigma;
    let b = (l - (lnlnk + c) / (l * 2.0)) * sigma + mu;
    (a.hi(), b.hi())
}

#[test]
fn reduces_to_standard_constants() {
    let m = good_only(0.0, 1.0);
    for k in [10u64, 1_000, 1_000_000] {
        let g = norm_constants_mixture(k, &m).unwrap();
        let (a, b) = standard_constants(k as f64);
        assert!((g.a - a).abs() < 1e-12 && (g.b - b).abs() < 1e-12, "K={k}");
    }
}

#[test]
fn general_gaussian_constants() {
    let (mu, sigma) = (0.7, 1.9);
    let m = good_only(mu, sigma);
    for k in [10u64, 5000] {
        let g = norm_constants_mixture(k, &m).unwrap();
        let (a, b) = standard_constants(k as f64);
        assert!((g.a - a / sigma).abs() < 1e-12);
        assert!((g.b - (sigma * b + mu)).abs() < 1e-12);
    }
}

#[test]
fn mixture_constants_match_extended_precision() {
    let g = norm_constants_mixture(5000, &fig_model()).unwrap();
    let (a, b) = dd_constants(5000, 0.5, SQRT_2, 0.5);
    assert!(rel(g.a, a) < 1e-14 && rel(g.b, b) < 1e-14, "{g:?} vs ({a}, {b})");
}

#[test]
fn domain_errors() {
    let m = fig_model();
    assert!(norm_constants_mixture(2, &m).is_err());
    let bad_only = ChannelModel::new(0.4, 0.0, SQRT_2, 0.5, 0.0, 0.3).unwrap();
    assert!(norm_constants_mixture(100, &bad_only).is_err());
    let tiny = ChannelModel::new(0.9, 0.1, SQRT_2, 0.5, 0.0, 0.3).unwrap();
    assert!(expected_capacity_good_only(20, &tiny).is_err());
}

#[test]
fn centralized_leading_order() {
    let m = fig_model();
    let resid = |k: u64| expected_capacity_centralized(k, &m).unwrap() - (0.5 * (2.0 * (k as f64).ln()).sqrt() + SQRT_2);
    assert!(resid(1_000_000).abs() < resid(1_000).abs());
    assert!(resid(1_000_000_000_000).abs() < resid(1_000_000).abs());
    assert!(expected_capacity_centralized(2000, &m).unwrap() < expected_capacity_centralized(5000, &m).unwrap());
}

fn mc_max_mean(n: usize, reps: usize, mu: f64, sigma: f64, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let maxima: Vec<f64> = (0..reps)
        .map(|_| (0..n).map(|_| mu + sigma * r.sample::<f64, _>(StandardNormal)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    mean_and_se(&maxima)
}

#[test]
fn centralized_matches_monte_carlo_maximum() {
    let m = good_only(0.0, 1.0);
    let analytic = expected_capacity_centralized(10_000, &m).unwrap();
    let (mean, se) = mc_max_mean(10_000, 2000, 0.0, 1.0, 11);
    assert!(
        (analytic - mean).abs() < 3.0 * se,
        "analytic {analytic}, simulated {mean} ± {se} (diff {}, 3 SE {})",
        (analytic - mean).abs(),
        3.0 * se
    );
}

#[test]
fn good_only_matches_monte_carlo_maximum() {
    let m = fig_model();
    let analytic = expected_capacity_good_only(5000, &m).unwrap();
    let (mean, se) = mc_max_mean(2500, 2000, SQRT_2, 0.5, 12);
    assert!(
        (analytic - mean).abs() < 3.0 * se,
        "analytic {analytic}, simulated {mean} ± {se} (diff {}, 3 SE {})",
        (analytic - mean).abs(),
        3.0 * se
    );
}

#[test]
fn good_only_collapses_at_full_occupancy() {
    let m = good_only(SQRT_2, 0.5);
    let a = expected_capacity_good_only(5000, &m).unwrap();
    let b = expected_capacity_centralized(5000, &m).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn good_only_versus_full_population_over_p() {
    let gap = |p: f64| {
        let m = ChannelModel::new(1.0 - p, p, SQRT_2, 0.5, 0.0, 0.3).unwrap();
        expected_capacity_centralized(5000, &m).unwrap() - expected_capacity_good_only(5000, &m).unwrap()
    };
    assert!(gap(0.05) > 0.0);
    let gaps: Vec<f64> = [0.05, 0.2, 0.5, 0.8, 0.99].iter().map(|&p| gap(p).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gap(1.0 - 1e-9).abs() < 1e-6);
}

#[test]
fn gumbel_helpers() {
    let g = norm_constants_mixture(5000, &fig_model()).unwrap();
    assert!((gumbel_cdf(g.b, &g) - (-1.0f64).exp()).abs() < 1e-15);
    assert_eq!(gumbel_cdf(g.b + 1e3, &g), 1.0);
    assert_eq!(gumbel_mean(&g), expected_capacity_centralized(5000, &fig_model()).unwrap());
    assert!((gumbel_mean(&g) - (g.b + 0.5772156649015329 / g.a)).abs() < 1e-15);
    assert_eq!(EULER_GAMMA, 0.5772156649015329);
    let mass = simpson(&|x| gumbel_pdf(x, &g), g.b - 10.0 / g.a, g.b + 40.0 / g.a, 1e-12);
    assert!((mass - 1.0).abs() < 1e-9);
}

#[test]
fn reciprocal_hazard_properties() {
    let std = good_only(0.0, 1.0);
    assert!(rel(reciprocal_hazard(6.0, &std).unwrap(), 1.0 / 6.0) < 0.05);

    let m = fig_model();
    let slope = (reciprocal_hazard(8.0, &m).unwrap() - reciprocal_hazard(6.0, &m).unwrap()) / 2.0;
    assert!(slope.abs() < 0.05, "slope {slope}");
    for i in 0..200 {
        let t = -3.0 + 0.06 * i as f64;
        assert!(reciprocal_hazard(t, &m).unwrap() > 0.0);
    }
    assert!(reciprocal_hazard(1e3, &m).is_err());
}

#[test]
fn tail_ratio_approaches_exponential() {
    let m = fig_model();
    let ratio_err = |z: f64| {
        let t = m.mu_g + z * m.sigma_g;
        let g = m.sigma_g * m.sigma_g / (t - m.mu_g);
        let x = 1.0;
        (mixture_sf(t + x * g, &m) / mixture_sf(t, &m) - (-x).exp()).abs()
    };
    assert!(ratio_err(8.0) < ratio_err(4.0));
    assert!(ratio_err(8.0) < 0.03 * (-1.0f64).exp());
}

#[test]
fn stationary_probability_feeds_constants() {
    let m = ChannelModel::new(0.3, 0.1, SQRT_2, 0.5, 0.0, 0.3).unwrap();
    let (p, _) = stationary_state_probs(&m).unwrap();
    let g = norm_constants_mixture(1000, &m).unwrap();
    let (_, b) = dd_constants(1000, p, SQRT_2, 0.5);
    assert!((g.b - b).abs() < 1e-13);
}

proptest! {
    #[test]
    fn affine_equivariance(c in 0.1..10.0f64, k in 3u64..1_000_000) {
        let m = fig_model();
        let s = ChannelModel::new(m.alpha, m.beta, c * m.mu_g, c * m.sigma_g, c * m.mu_b, c * m.sigma_b).unwrap();
        let g = norm_constants_mixture(k, &m).unwrap();
        let h = norm_constants_mixture(k, &s).unwrap();
        prop_assert!(((1.0 / h.a) - c / g.a).abs() <= 1e-12 * (c / g.a));
        prop_assert!((h.b - c * g.b).abs() <= 1e-12 * (c * g.b).abs().max(1.0));
    }

    #[test]
    fn constants_reduce_for_any_gaussian(k in 3u64..10_000_000, mu in -5.0..5.0f64, sigma in 0.1..5.0f64) {
        let g = norm_constants_mixture(k, &good_only(mu, sigma)).unwrap();
        let (a, b) = standard_constants(k as f64);
        prop_assert!((g.a - a / sigma).abs() < 1e-12 * a / sigma);
        prop_assert!((g.b - (sigma * b + mu)).abs() < 1e-12 * (sigma * b + mu).abs().max(1.0));
    }
}
