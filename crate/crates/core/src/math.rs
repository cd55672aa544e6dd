//! Scalar numeric kernels shared across the crate.
//!
//! Everything here is a total function of finite inputs and is written to be
//! overflow-safe for linear predictors far outside the range where the naive
//! formulas would saturate. Probabilities are never materialized as exactly
//! 0 or 1; log-space forms are used throughout.

use crate::error::Error;
use crate::Result;

/// ln(2π).
pub const LN_2PI: f64 = 1.8378770664093453;

/// ln(π).
pub const LN_PI: f64 = 1.1447298858494002;

/// Logistic function 1 / (1 + exp(-x)), stable over the full f64 range.
#[inline]
pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of `inv_logit` on (0, 1).
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// ln(1 + exp(x)) without overflow.
///
/// For large x the result is x to machine precision; for very negative x it
/// is exp(x).
#[inline]
pub fn log1p_exp(x: f64) -> f64 {
    if x > 33.3 {
        x
    } else if x > -36.7 {
        x.exp().ln_1p()
    } else {
        x.exp()
    }
}

/// Log-mass of a Bernoulli observation parameterized by the logit of the
/// success probability.
#[inline]
pub fn bernoulli_logit_logpmf(y: u8, logit_p: f64) -> f64 {
    if y == 1 {
        -log1p_exp(-logit_p)
    } else {
        -log1p_exp(logit_p)
    }
}

/// Log-density of N(mean, sd²) at x.
#[inline]
pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let r = (x - mean) / sd;
    -0.5 * LN_2PI - sd.ln() - 0.5 * r * r
}

/// Log-density of the standard normal at z.
#[inline]
pub fn std_normal_logpdf(z: f64) -> f64 {
    -0.5 * LN_2PI - 0.5 * z * z
}

/// Log-density of the mean-zero bivariate normal with standard deviations
/// `tau_a`, `tau_b` and correlation `rho`.
///
/// Rejects non-positive scales and |rho| >= 1.
pub fn bvn_logpdf(u_a: f64, u_b: f64, tau_a: f64, tau_b: f64, rho: f64) -> Result<f64> {
    if !(tau_a > 0.0) || !(tau_b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bivariate normal scales must be positive (tau_a = {tau_a}, tau_b = {tau_b})"
        )));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "bivariate normal correlation must lie in (-1, 1) (rho = {rho})"
        )));
    }
    Ok(bvn_logpdf_unchecked(u_a, u_b, tau_a, tau_b, rho))
}

/// `bvn_logpdf` without the argument checks, for callers holding parameters
/// that were validated at construction.
#[inline]
pub(crate) fn bvn_logpdf_unchecked(u_a: f64, u_b: f64, tau_a: f64, tau_b: f64, rho: f64) -> f64 {
    let s = 1.0 - rho * rho;
    let qa = u_a / tau_a;
    let qb = u_b / tau_b;
    let quad = (qa * qa - 2.0 * rho * qa * qb + qb * qb) / s;
    -LN_2PI - tau_a.ln() - tau_b.ln() - 0.5 * s.ln() - 0.5 * quad
}

/// log(Σ exp(x_k)) over a slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// log(Σ w_k exp(a_k)) for positive weights, evaluated stably.
pub fn weighted_log_sum_exp(log_terms: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(log_terms.len(), weights.len());
    let max = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = log_terms
        .iter()
        .zip(weights)
        .map(|(&a, &w)| w * (a - max).exp())
        .sum();
    max + sum.ln()
}

/// Pearson correlation of two equal-length samples.
///
/// Errors on length mismatch, fewer than 3 points, or zero variance in
/// either argument.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::Metric(format!(
            "correlation needs at least 3 points, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Metric("zero variance in correlation input".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Empirical quantile with linear interpolation between order statistics
/// (type-7 convention). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (divisor n − 1); 0 for fewer than 2 points.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}
