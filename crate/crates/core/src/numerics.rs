//! Special functions, root bracketing and quadrature used across the crate.

use crate::error::{Error, Result};
use statrs::function::erf;
use std::f64::consts::{PI, SQRT_2};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Complementary error function (musl port, about 1 ulp).
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Inverse complementary error function on (0, 2), Newton-polished.
pub fn erfc_inv(y: f64) -> f64 {
    if y <= 0.0 {
        return f64::INFINITY;
    }
    if y >= 2.0 {
        return f64::NEG_INFINITY;
    }
    if y == 1.0 {
        return 0.0;
    }
    let mut x = erf::erfc_inv(y);
    for _ in 0..3 {
        let d = -FRAC_2_SQRT_PI * (-x * x).exp();
        if d == 0.0 || !x.is_finite() {
            break;
        }
        let step = (erfc(x) - y) / d;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal survival function 1 - Φ(z), accurate in the upper tail.
pub fn norm_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Bisection on a bracket where `f(lo)` and `f(hi)` differ in sign.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Domain(format!(
            "root not bracketed on [{lo}, {hi}]"
        )));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= xtol {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Composite double-exponential quadrature over `panels` equal sub-intervals.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, panels: usize) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::Integration(format!("bad interval [{a}, {b}]")));
    }
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    let tol = abs_tol / n as f64;
    let mut total = 0.0;
    let mut err = 0.0;
    for k in 0..n {
        let lo = a + h * k as f64;
        let hi = if k + 1 == n { b } else { lo + h };
        let out = quadrature::integrate(&f, lo, hi, tol);
        total += out.integral;
        err += out.error_estimate;
    }
    if !total.is_finite() || err > 100.0 * abs_tol {
        return Err(Error::Integration(format!(
            "error estimate {err:e} exceeds tolerance {abs_tol:e} on [{a}, {b}]"
        )));
    }
    Ok(total)
}

/// ln C(n, k) via log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    statrs::function::factorial::ln_binomial(n, k)
}

/// e * ln(x) with the convention 0 * ln(0) = 0.
pub fn xlogx(e: f64, x: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        e * x.ln()
    }
}
