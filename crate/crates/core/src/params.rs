//! Structural parameters, latent states, priors, and the constrained ↔
//! unconstrained reparameterization used by the gradient-based machinery.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::math;
use crate::Result;

/// Number of free structural parameters.
pub const N_PARAMS: usize = 19;

/// Canonical parameter order used by every flat-vector interface (gradients,
/// draws files, report tables).
pub const PARAM_NAMES: [&str; N_PARAMS] = [
    "alpha0", "alpha1", "alpha2", "beta0", "beta1", "beta2", "gamma0", "gamma1", "delta0",
    "delta1", "eta0", "eta1", "eta2", "eta3", "tau_a", "tau_b", "rho", "sigma", "sigma_t",
];

/// Indices of the 14 unconstrained regression coefficients in canonical order.
pub const COEF_INDICES: [usize; 14] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13];

/// Indices of the positive scale parameters (log-transformed).
pub const SCALE_INDICES: [usize; 4] = [14, 15, 17, 18];

/// Index of the random-intercept correlation (atanh-transformed).
pub const RHO_INDEX: usize = 16;

/// Full structural parameter set of the three-phase model.
///
/// Scale parameters are stored as standard deviations; their squares are the
/// model variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    /// Feedback-phase binary model: intercept, autoregression, cross-lag.
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Feedback-phase continuous model: intercept, autoregression, cross-lag.
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Reversal-phase binary model: intercept, latent-trait slope.
    pub gamma0: f64,
    pub gamma1: f64,
    /// Reversal-phase continuous model: intercept, latent-trait slope.
    pub delta0: f64,
    pub delta1: f64,
    /// Outcome model: intercept, reversal-binary, reversal-continuous, latent-trait.
    pub eta0: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    /// Random-intercept standard deviations.
    pub tau_a: f64,
    pub tau_b: f64,
    /// Random-intercept correlation, in (−1, 1).
    pub rho: f64,
    /// Feedback-phase residual standard deviation.
    pub sigma: f64,
    /// Reversal-phase residual standard deviation.
    pub sigma_t: f64,
}

impl StructuralParams {
    /// Checks positivity of the scales, |rho| < 1, and finiteness of every
    /// component.
    pub fn validate(&self) -> Result<()> {
        let v = self.to_array();
        for (name, value) in PARAM_NAMES.iter().zip(v.iter()) {
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        for &i in &SCALE_INDICES {
            if v[i] <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{} must be positive, got {}",
                    PARAM_NAMES[i], v[i]
                )));
            }
        }
        if self.rho.abs() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "rho must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }

    /// Flattens into canonical order.
    pub fn to_array(&self) -> [f64; N_PARAMS] {
        [
            self.alpha0,
            self.alpha1,
            self.alpha2,
            self.beta0,
            self.beta1,
            self.beta2,
            self.gamma0,
            self.gamma1,
            self.delta0,
            self.delta1,
            self.eta0,
            self.eta1,
            self.eta2,
            self.eta3,
            self.tau_a,
            self.tau_b,
            self.rho,
            self.sigma,
            self.sigma_t,
        ]
    }

    /// Rebuilds from canonical order. Does not validate.
    pub fn from_array(v: [f64; N_PARAMS]) -> Self {
        Self {
            alpha0: v[0],
            alpha1: v[1],
            alpha2: v[2],
            beta0: v[3],
            beta1: v[4],
            beta2: v[5],
            gamma0: v[6],
            gamma1: v[7],
            delta0: v[8],
            delta1: v[9],
            eta0: v[10],
            eta1: v[11],
            eta2: v[12],
            eta3: v[13],
            tau_a: v[14],
            tau_b: v[15],
            rho: v[16],
            sigma: v[17],
            sigma_t: v[18],
        }
    }

    /// Maps into the unconstrained space: log for scales, atanh for rho,
    /// identity for regression coefficients.
    pub fn unconstrain(&self) -> UnconstrainedParams {
        let mut u = self.to_array();
        for &i in &SCALE_INDICES {
            u[i] = u[i].ln();
        }
        u[RHO_INDEX] = u[RHO_INDEX].atanh();
        UnconstrainedParams(u)
    }
}

/// The 19 structural parameters after mapping every constrained component to
/// the real line. Bijective with [`StructuralParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnconstrainedParams(pub [f64; N_PARAMS]);

impl UnconstrainedParams {
    /// Maps back to the constrained space, returning the parameters together
    /// with the log absolute determinant of the transform Jacobian
    /// (Σ log-scale terms plus the atanh adjustment `log(1 − rho²)`).
    pub fn constrain(&self) -> (StructuralParams, f64) {
        let mut v = self.0;
        let mut log_jac = 0.0;
        for &i in &SCALE_INDICES {
            log_jac += v[i];
            v[i] = v[i].exp();
        }
        let rho = v[RHO_INDEX].tanh();
        v[RHO_INDEX] = rho;
        log_jac += (1.0 - rho * rho).ln();
        (StructuralParams::from_array(v), log_jac)
    }
}

/// Per-subject latent triple: random intercepts for the two feedback series
/// plus the shared latent trait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub u_a: f64,
    pub u_b: f64,
    pub z: f64,
}

impl LatentState {
    pub fn zero() -> Self {
        Self {
            u_a: 0.0,
            u_b: 0.0,
            z: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u_a.is_finite() && self.u_b.is_finite() && self.z.is_finite()
    }
}

/// Hyperparameters of the weakly informative prior used by the Bayesian path:
/// independent N(0, coef_sd²) on every regression coefficient, half-Cauchy(0,
/// scale_cauchy) on each standard deviation, and a uniform density on the
/// correlation over (−1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub coef_sd: f64,
    pub scale_cauchy: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            coef_sd: 10.0,
            scale_cauchy: 2.5,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.coef_sd > 0.0) || !(self.scale_cauchy > 0.0) {
            return Err(Error::InvalidConfig(
                "prior hyperparameters must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Prior log-density at constrained parameters, and its gradient with
    /// respect to the constrained parameters.
    ///
    /// The uniform correlation prior contributes the constant −log 2.
    pub fn logpdf_grad(&self, theta: &StructuralParams, grad: &mut [f64; N_PARAMS]) -> f64 {
        let v = theta.to_array();
        let mut lp = 0.0;
        let var = self.coef_sd * self.coef_sd;
        for &i in &COEF_INDICES {
            lp += math::normal_logpdf(v[i], 0.0, self.coef_sd);
            grad[i] -= v[i] / var;
        }
        let s = self.scale_cauchy;
        for &i in &SCALE_INDICES {
            let x = v[i];
            // Half-Cauchy(0, s): log f = log 2 − log π − log s − log(1 + (x/s)²).
            lp += std::f64::consts::LN_2 - math::LN_PI - s.ln() - ((x / s).powi(2)).ln_1p();
            grad[i] += -2.0 * x / (s * s + x * x);
        }
        lp -= std::f64::consts::LN_2; // uniform density 1/2 on rho ∈ (−1, 1)
        lp
    }
}
