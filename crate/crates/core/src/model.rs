//! Exact log-density kernels for the three model phases, their analytic
//! gradients, and the joint posterior target used by the sampler.
//!
//! Indexing convention: times are 0-based internally. The feedback phase
//! governs transitions into indices `1 ..= T-2` (times 2…T−1); the reversal
//! phase alone governs index `T-1` (time T). Initial values at index 0 are
//! conditioned on and contribute no likelihood terms.
//!
//! The complete-data log density separates structurally: the feedback terms
//! depend on the random intercepts `(u_a, u_b)` only, and the reversal and
//! outcome terms depend on the latent trait `z` only. The quadrature module
//! exploits this factorization; the tests assert it.

use crate::data::PanelDataset;
use crate::error::Error;
use crate::math::{
    bernoulli_logit_logpmf, bvn_logpdf_unchecked, inv_logit, normal_logpdf, std_normal_logpdf,
    LN_2PI,
};
use crate::params::{
    LatentState, PriorConfig, StructuralParams, UnconstrainedParams, N_PARAMS, RHO_INDEX,
    SCALE_INDICES,
};
use crate::sampler::LogDensityGradient;
use crate::Result;

/// Feedback-phase log density of one transition: Bernoulli log-mass of
/// `a_cur` plus normal log-density of `b_cur`, both conditional on the lagged
/// pair and the random intercepts.
pub fn phase1_logdensity(
    params: &StructuralParams,
    a_prev: u8,
    b_prev: f64,
    a_cur: u8,
    b_cur: f64,
    latent: &LatentState,
) -> f64 {
    phase1_logdensity_off(params, a_prev, b_prev, a_cur, b_cur, latent.u_a, latent.u_b, 0.0, 0.0)
}

#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn phase1_logdensity_off(
    params: &StructuralParams,
    a_prev: u8,
    b_prev: f64,
    a_cur: u8,
    b_cur: f64,
    u_a: f64,
    u_b: f64,
    off_a: f64,
    off_b: f64,
) -> f64 {
    let ap = a_prev as f64;
    let x = params.alpha0 + params.alpha1 * ap + params.alpha2 * b_prev + u_a + off_a;
    let mu = params.beta0 + params.beta1 * b_prev + params.beta2 * ap + u_b + off_b;
    bernoulli_logit_logpmf(a_cur, x) + normal_logpdf(b_cur, mu, params.sigma)
}

/// Reversal-phase log density: the final pair `(a_final, b_final)` is driven
/// by the latent trait alone, the two components conditionally independent
/// given `z`.
pub fn phase2_logdensity(params: &StructuralParams, a_final: u8, b_final: f64, z: f64) -> f64 {
    phase2_logdensity_off(params, a_final, b_final, z, 0.0, 0.0)
}

#[inline]
pub(crate) fn phase2_logdensity_off(
    params: &StructuralParams,
    a_final: u8,
    b_final: f64,
    z: f64,
    off_a: f64,
    off_b: f64,
) -> f64 {
    let x = params.gamma0 + params.gamma1 * z + off_a;
    let mu = params.delta0 + params.delta1 * z + off_b;
    bernoulli_logit_logpmf(a_final, x) + normal_logpdf(b_final, mu, params.sigma_t)
}

/// Outcome-phase Bernoulli log-mass of the final endpoint.
pub fn phase3_logdensity(
    params: &StructuralParams,
    y: u8,
    a_final: u8,
    b_final: f64,
    z: f64,
) -> f64 {
    phase3_logdensity_off(params, y, a_final, b_final, z, 0.0)
}

#[inline]
pub(crate) fn phase3_logdensity_off(
    params: &StructuralParams,
    y: u8,
    a_final: u8,
    b_final: f64,
    z: f64,
    off: f64,
) -> f64 {
    let x = params.eta0
        + params.eta1 * a_final as f64
        + params.eta2 * b_final
        + params.eta3 * z
        + off;
    bernoulli_logit_logpmf(y, x)
}

/// Sum of the feedback-phase terms for one subject, a function of the random
/// intercepts only.
pub(crate) fn subject_feedback_loglik(
    params: &StructuralParams,
    data: &PanelDataset,
    subject: usize,
    u_a: f64,
    u_b: f64,
) -> f64 {
    let t_len = data.n_times();
    let a = data.a_row(subject);
    let b = data.b_row(subject);
    let exog = data.exog();
    let mut total = 0.0;
    for c in 1..t_len - 1 {
        let (off_a, off_b) = exog.map_or((0.0, 0.0), |e| {
            let k = subject * t_len + c;
            (e.phase1_binary[k], e.phase1_continuous[k])
        });
        total += phase1_logdensity_off(params, a[c - 1], b[c - 1], a[c], b[c], u_a, u_b, off_a, off_b);
    }
    total
}

/// Sum of the reversal-phase and outcome terms for one subject, a function of
/// the latent trait only.
pub(crate) fn subject_reversal_outcome_loglik(
    params: &StructuralParams,
    data: &PanelDataset,
    subject: usize,
    z: f64,
) -> f64 {
    let t_last = data.n_times() - 1;
    let a_final = data.a(subject, t_last);
    let b_final = data.b(subject, t_last);
    let exog = data.exog();
    let (off2a, off2b, off3) = exog.map_or((0.0, 0.0, 0.0), |e| {
        (
            e.phase2_binary[subject],
            e.phase2_continuous[subject],
            e.phase3[subject],
        )
    });
    phase2_logdensity_off(params, a_final, b_final, z, off2a, off2b)
        + phase3_logdensity_off(params, data.y(subject), a_final, b_final, z, off3)
}

/// Complete-data log density of one subject given its latent state: all
/// feedback transitions, the reversal pair, and the outcome. Latent priors
/// are *not* included; see [`latent_logprior`].
pub fn subject_complete_logdensity(
    params: &StructuralParams,
    subject: usize,
    data: &PanelDataset,
    latent: &LatentState,
) -> Result<f64> {
    data.check_subject(subject)?;
    Ok(subject_feedback_loglik(params, data, subject, latent.u_a, latent.u_b)
        + subject_reversal_outcome_loglik(params, data, subject, latent.z))
}

/// Log prior of one latent triple: bivariate normal on the intercept pair
/// plus standard normal on the trait.
pub fn latent_logprior(latent: &LatentState, params: &StructuralParams) -> f64 {
    bvn_logpdf_unchecked(latent.u_a, latent.u_b, params.tau_a, params.tau_b, params.rho)
        + std_normal_logpdf(latent.z)
}

/// Workspace-free accumulation of one subject's log density and gradient.
///
/// Adds the subject's contribution to `grad_theta` (constrained-space
/// gradient, canonical order) and writes the latent gradient `(∂u_a, ∂u_b,
/// ∂z)` into `grad_latent`. Returns the subject's log-density contribution
/// including the latent prior.
fn accumulate_subject(
    params: &StructuralParams,
    data: &PanelDataset,
    subject: usize,
    u_a: f64,
    u_b: f64,
    z: f64,
    grad_theta: &mut [f64; N_PARAMS],
    grad_latent: &mut [f64; 3],
) -> f64 {
    let t_len = data.n_times();
    let a = data.a_row(subject);
    let b = data.b_row(subject);
    let exog = data.exog();
    let sigma2 = params.sigma * params.sigma;
    let sigma_t2 = params.sigma_t * params.sigma_t;
    let mut val = 0.0;

    // Feedback phase.
    for c in 1..t_len - 1 {
        let (off_a, off_b) = exog.map_or((0.0, 0.0), |e| {
            let k = subject * t_len + c;
            (e.phase1_binary[k], e.phase1_continuous[k])
        });
        let ap = a[c - 1] as f64;
        let bp = b[c - 1];

        let x = params.alpha0 + params.alpha1 * ap + params.alpha2 * bp + u_a + off_a;
        val += bernoulli_logit_logpmf(a[c], x);
        let e = a[c] as f64 - inv_logit(x);
        grad_theta[0] += e;
        grad_theta[1] += e * ap;
        grad_theta[2] += e * bp;
        grad_latent[0] += e;

        let mu = params.beta0 + params.beta1 * bp + params.beta2 * ap + u_b + off_b;
        let resid = b[c] - mu;
        val += -0.5 * LN_2PI - params.sigma.ln() - 0.5 * resid * resid / sigma2;
        let r = resid / sigma2;
        grad_theta[3] += r;
        grad_theta[4] += r * bp;
        grad_theta[5] += r * ap;
        grad_latent[1] += r;
        grad_theta[17] += (resid * resid / sigma2 - 1.0) / params.sigma;
    }

    // Reversal phase.
    let t_last = t_len - 1;
    let a_final = a[t_last];
    let b_final = b[t_last];
    let af = a_final as f64;
    let (off2a, off2b, off3) = exog.map_or((0.0, 0.0, 0.0), |e| {
        (
            e.phase2_binary[subject],
            e.phase2_continuous[subject],
            e.phase3[subject],
        )
    });

    let x2 = params.gamma0 + params.gamma1 * z + off2a;
    val += bernoulli_logit_logpmf(a_final, x2);
    let e2 = af - inv_logit(x2);
    grad_theta[6] += e2;
    grad_theta[7] += e2 * z;
    grad_latent[2] += e2 * params.gamma1;

    let mu2 = params.delta0 + params.delta1 * z + off2b;
    let resid2 = b_final - mu2;
    val += -0.5 * LN_2PI - params.sigma_t.ln() - 0.5 * resid2 * resid2 / sigma_t2;
    let r2 = resid2 / sigma_t2;
    grad_theta[8] += r2;
    grad_theta[9] += r2 * z;
    grad_latent[2] += r2 * params.delta1;
    grad_theta[18] += (resid2 * resid2 / sigma_t2 - 1.0) / params.sigma_t;

    // Outcome phase.
    let x3 = params.eta0 + params.eta1 * af + params.eta2 * b_final + params.eta3 * z + off3;
    val += bernoulli_logit_logpmf(data.y(subject), x3);
    let e3 = data.y(subject) as f64 - inv_logit(x3);
    grad_theta[10] += e3;
    grad_theta[11] += e3 * af;
    grad_theta[12] += e3 * b_final;
    grad_theta[13] += e3 * z;
    grad_latent[2] += e3 * params.eta3;

    // Latent priors.
    let s = 1.0 - params.rho * params.rho;
    let qa = u_a / params.tau_a;
    let qb = u_b / params.tau_b;
    let quad = qa * qa - 2.0 * params.rho * qa * qb + qb * qb;
    val += -LN_2PI - params.tau_a.ln() - params.tau_b.ln() - 0.5 * s.ln() - 0.5 * quad / s;
    grad_latent[0] -= (qa - params.rho * qb) / (params.tau_a * s);
    grad_latent[1] -= (qb - params.rho * qa) / (params.tau_b * s);
    grad_theta[14] += (-1.0 + qa * (qa - params.rho * qb) / s) / params.tau_a;
    grad_theta[15] += (-1.0 + qb * (qb - params.rho * qa) / s) / params.tau_b;
    grad_theta[16] += params.rho / s - (params.rho * quad - qa * qb * s) / (s * s);

    val += std_normal_logpdf(z);
    grad_latent[2] -= z;

    val
}

/// Value and exact gradient of the complete-data log posterior in the
/// unconstrained space.
///
/// The value is Σ_i [subject complete log density + latent log prior] plus
/// the prior log density of the structural parameters and the log Jacobian
/// of the constraining transform. The gradient has `19 + 3·n_subjects`
/// entries: the unconstrained structural block followed by per-subject
/// `(u_a, u_b, z)` triples.
pub fn complete_logdensity_grad(
    u: &UnconstrainedParams,
    latents: &[LatentState],
    data: &PanelDataset,
    priors: &PriorConfig,
) -> Result<(f64, Vec<f64>)> {
    if latents.len() != data.n_subjects() {
        return Err(Error::DimensionMismatch {
            expected: data.n_subjects(),
            got: latents.len(),
        });
    }
    let mut grad = vec![0.0; N_PARAMS + 3 * data.n_subjects()];
    let mut flat = Vec::with_capacity(N_PARAMS + 3 * latents.len());
    flat.extend_from_slice(&u.0);
    for l in latents {
        flat.extend_from_slice(&[l.u_a, l.u_b, l.z]);
    }
    let target = JointPosterior::full(data, *priors);
    let value = target.logp_grad(&flat, &mut grad);
    Ok((value, grad))
}

/// The joint log posterior over the unconstrained structural parameters and
/// all per-subject latents, with optional parameter pins for the nested
/// comparator models.
///
/// State layout: free unconstrained structural parameters in canonical order,
/// then per subject either `(u_a, u_b, z)` or `(u_a, u_b)` when the latent
/// trait is excluded.
pub struct JointPosterior<'a> {
    data: &'a PanelDataset,
    priors: PriorConfig,
    /// Constrained-space pin values, one slot per structural parameter.
    pins: [Option<f64>; N_PARAMS],
    /// Canonical indices of the free parameters.
    free: Vec<usize>,
    include_z: bool,
}

impl<'a> JointPosterior<'a> {
    /// The unrestricted model.
    pub fn full(data: &'a PanelDataset, priors: PriorConfig) -> Self {
        Self::with_pins(data, priors, &[], true)
    }

    /// A restricted model with the listed parameters pinned at fixed
    /// constrained values. `include_z` may be false only if every latent-trait
    /// slope (gamma1, delta1, eta3) is pinned, otherwise dropping `z` would
    /// change the likelihood.
    pub fn with_pins(
        data: &'a PanelDataset,
        priors: PriorConfig,
        pins: &[(usize, f64)],
        include_z: bool,
    ) -> Self {
        let mut pin_slots = [None; N_PARAMS];
        for &(i, v) in pins {
            pin_slots[i] = Some(v);
        }
        if !include_z {
            for i in [7usize, 9, 13] {
                assert!(
                    pin_slots[i].is_some(),
                    "dropping z requires pinning {}",
                    crate::params::PARAM_NAMES[i]
                );
            }
        }
        let free = (0..N_PARAMS).filter(|i| pin_slots[*i].is_none()).collect();
        Self {
            data,
            priors,
            pins: pin_slots,
            free,
            include_z,
        }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_indices(&self) -> &[usize] {
        &self.free
    }

    pub fn latents_per_subject(&self) -> usize {
        if self.include_z {
            3
        } else {
            2
        }
    }

    pub fn data(&self) -> &PanelDataset {
        self.data
    }

    /// Assembles the full unconstrained 19-vector from the free block of a
    /// state vector, filling pinned slots with their (transformed) values.
    fn unconstrained_from_state(&self, state: &[f64]) -> UnconstrainedParams {
        let mut u = [0.0; N_PARAMS];
        for (slot, &idx) in self.free.iter().enumerate() {
            u[idx] = state[slot];
        }
        for i in 0..N_PARAMS {
            if let Some(v) = self.pins[i] {
                u[i] = if SCALE_INDICES.contains(&i) {
                    v.ln()
                } else if i == RHO_INDEX {
                    v.atanh()
                } else {
                    v
                };
            }
        }
        UnconstrainedParams(u)
    }

    /// Constrained structural parameters for a state vector.
    pub fn params_from_state(&self, state: &[f64]) -> StructuralParams {
        self.unconstrained_from_state(state).constrain().0
    }

    /// Latent triple of one subject from a state vector (z = 0 when the trait
    /// is excluded).
    pub fn latent_from_state(&self, state: &[f64], subject: usize) -> LatentState {
        let k = self.latents_per_subject();
        let base = self.n_free() + subject * k;
        LatentState {
            u_a: state[base],
            u_b: state[base + 1],
            z: if self.include_z { state[base + 2] } else { 0.0 },
        }
    }
}

impl LogDensityGradient for JointPosterior<'_> {
    fn dim(&self) -> usize {
        self.n_free() + self.latents_per_subject() * self.data.n_subjects()
    }

    fn logp_grad(&self, position: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert_eq!(position.len(), self.dim());
        debug_assert_eq!(grad.len(), self.dim());
        grad.fill(0.0);

        let u = self.unconstrained_from_state(position);
        let (theta, log_jac_full) = u.constrain();
        let theta_vec = theta.to_array();
        if theta_vec.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }

        // The log Jacobian only counts free constrained components.
        let mut log_jac = log_jac_full;
        for &i in &SCALE_INDICES {
            if self.pins[i].is_some() {
                log_jac -= u.0[i];
            }
        }
        if self.pins[RHO_INDEX].is_some() {
            log_jac -= (1.0 - theta.rho * theta.rho).ln();
        }

        let mut grad_theta = [0.0; N_PARAMS];
        let mut free_mask = [false; N_PARAMS];
        for &i in &self.free {
            free_mask[i] = true;
        }
        let mut value = log_jac + prior_logpdf_grad_masked(&self.priors, &theta, &free_mask, &mut grad_theta);

        let k = self.latents_per_subject();
        let n = self.data.n_subjects();
        for i in 0..n {
            let base = self.n_free() + i * k;
            let u_a = position[base];
            let u_b = position[base + 1];
            let z = if self.include_z { position[base + 2] } else { 0.0 };
            let mut grad_latent = [0.0; 3];
            value += accumulate_subject(
                &theta,
                self.data,
                i,
                u_a,
                u_b,
                z,
                &mut grad_theta,
                &mut grad_latent,
            );
            grad[base] = grad_latent[0];
            grad[base + 1] = grad_latent[1];
            if self.include_z {
                grad[base + 2] = grad_latent[2];
            } else {
                // The z prior was counted inside accumulate_subject; undo it
                // since z is not part of the model here.
                value -= std_normal_logpdf(0.0);
            }
        }

        // Chain rule back to the unconstrained space for the free block.
        for (slot, &i) in self.free.iter().enumerate() {
            grad[slot] = if SCALE_INDICES.contains(&i) {
                theta_vec[i] * grad_theta[i] + 1.0
            } else if i == RHO_INDEX {
                let rho = theta.rho;
                (1.0 - rho * rho) * grad_theta[i] - 2.0 * rho
            } else {
                grad_theta[i]
            };
        }
        value
    }
}

/// Prior log density restricted to the free parameters, with its
/// constrained-space gradient accumulated into `grad`.
fn prior_logpdf_grad_masked(
    priors: &PriorConfig,
    theta: &StructuralParams,
    free: &[bool; N_PARAMS],
    grad: &mut [f64; N_PARAMS],
) -> f64 {
    let v = theta.to_array();
    let mut lp = 0.0;
    let var = priors.coef_sd * priors.coef_sd;
    for &i in &crate::params::COEF_INDICES {
        if free[i] {
            lp += normal_logpdf(v[i], 0.0, priors.coef_sd);
            grad[i] -= v[i] / var;
        }
    }
    let s = priors.scale_cauchy;
    for &i in &SCALE_INDICES {
        if free[i] {
            let x = v[i];
            lp += std::f64::consts::LN_2 - crate::math::LN_PI - s.ln() - ((x / s).powi(2)).ln_1p();
            grad[i] += -2.0 * x / (s * s + x * x);
        }
    }
    if free[RHO_INDEX] {
        lp -= std::f64::consts::LN_2;
    }
    lp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::logit;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn demo_params() -> StructuralParams {
        StructuralParams {
            alpha0: 0.2,
            alpha1: 0.5,
            alpha2: 0.3,
            beta0: -0.1,
            beta1: 0.5,
            beta2: 0.4,
            gamma0: 0.1,
            gamma1: 0.8,
            delta0: -0.2,
            delta1: 0.7,
            eta0: 0.3,
            eta1: 1.0,
            eta2: -0.5,
            eta3: 0.8,
            tau_a: 0.9,
            tau_b: 1.3,
            rho: 0.4,
            sigma: 1.1,
            sigma_t: 0.8,
        }
    }

    fn zero_params() -> StructuralParams {
        StructuralParams {
            alpha0: 0.0,
            alpha1: 0.0,
            alpha2: 0.0,
            beta0: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            gamma0: 0.0,
            gamma1: 0.0,
            delta0: 0.0,
            delta1: 0.0,
            eta0: 0.0,
            eta1: 0.0,
            eta2: 0.0,
            eta3: 0.0,
            tau_a: 1.0,
            tau_b: 1.0,
            rho: 0.0,
            sigma: 1.0,
            sigma_t: 1.0,
        }
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, t: usize) -> PanelDataset {
        let a = (0..n * t).map(|_| (rng.random::<f64>() < 0.5) as u8).collect();
        let b = (0..n * t).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let y = (0..n).map(|_| (rng.random::<f64>() < 0.5) as u8).collect();
        PanelDataset::new(n, t, a, b, y, None).unwrap()
    }

    #[test]
    fn phase1_null_model_factors() {
        let p = zero_params();
        let lat = LatentState::zero();
        let v = phase1_logdensity(&p, 0, 0.0, 1, 0.0, &lat);
        let expect = 0.5f64.ln() + (-0.5 * LN_2PI);
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn phase1_binary_symmetry_at_zero_predictor() {
        let p = zero_params();
        let lat = LatentState::zero();
        let v1 = phase1_logdensity(&p, 1, 0.7, 1, 0.0, &lat);
        let v0 = phase1_logdensity(&p, 1, 0.7, 0, 0.0, &lat);
        assert!((v1 - v0).abs() < 1e-12);
    }

    #[test]
    fn phase1_matches_independent_oracle_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = demo_params();
        for _ in 0..200 {
            let a_prev = (rng.random::<f64>() < 0.5) as u8;
            let a_cur = (rng.random::<f64>() < 0.5) as u8;
            let b_prev = rng.random::<f64>() * 6.0 - 3.0;
            let b_cur = rng.random::<f64>() * 6.0 - 3.0;
            let lat = LatentState {
                u_a: rng.random::<f64>() - 0.5,
                u_b: rng.random::<f64>() - 0.5,
                z: 0.0,
            };
            // Oracle: direct Bernoulli + Gaussian densities on the raw scale.
            let pr = inv_logit(
                p.alpha0 + p.alpha1 * a_prev as f64 + p.alpha2 * b_prev + lat.u_a,
            );
            let bern = if a_cur == 1 { pr.ln() } else { (1.0 - pr).ln() };
            let mu = p.beta0 + p.beta1 * b_prev + p.beta2 * a_prev as f64 + lat.u_b;
            let gauss = (-0.5 * ((b_cur - mu) / p.sigma).powi(2)).exp()
                / (p.sigma * (2.0 * std::f64::consts::PI).sqrt());
            let oracle = bern + gauss.ln();
            let v = phase1_logdensity(&p, a_prev, b_prev, a_cur, b_cur, &lat);
            assert!((v - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn phase2_slope_free_case_and_substitution() {
        let mut p = zero_params();
        let v = phase2_logdensity(&p, 1, 0.0, 1.7);
        assert!((v - (0.5f64.ln() - 0.5 * LN_2PI)).abs() < 1e-12);

        p.gamma1 = 1.0;
        let lat_z = 2.0;
        let binary_part = phase2_logdensity(&p, 1, 0.0, lat_z) - normal_logpdf(0.0, 0.0, 1.0);
        assert!((binary_part - inv_logit(2.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn phase2_matches_independent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = demo_params();
        for _ in 0..200 {
            let a = (rng.random::<f64>() < 0.5) as u8;
            let b = rng.random::<f64>() * 6.0 - 3.0;
            let z = rng.random::<f64>() * 4.0 - 2.0;
            let pr = inv_logit(p.gamma0 + p.gamma1 * z);
            let bern = if a == 1 { pr.ln() } else { (1.0 - pr).ln() };
            let oracle = bern + normal_logpdf(b, p.delta0 + p.delta1 * z, p.sigma_t);
            assert!((phase2_logdensity(&p, a, b, z) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn phase3_trivial_cases() {
        let p = zero_params();
        assert!((phase3_logdensity(&p, 1, 0, 0.0, 0.0) - 0.5f64.ln()).abs() < 1e-12);

        let mut p = zero_params();
        p.eta0 = 1.0;
        let expect = (1.0 - inv_logit(1.0)).ln();
        assert!((phase3_logdensity(&p, 0, 0, 0.0, 0.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn phase3_matches_independent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = demo_params();
        for _ in 0..200 {
            let y = (rng.random::<f64>() < 0.5) as u8;
            let a = (rng.random::<f64>() < 0.5) as u8;
            let b = rng.random::<f64>() * 6.0 - 3.0;
            let z = rng.random::<f64>() * 4.0 - 2.0;
            let pr = inv_logit(p.eta0 + p.eta1 * a as f64 + p.eta2 * b + p.eta3 * z);
            let oracle = if y == 1 { pr.ln() } else { (1.0 - pr).ln() };
            assert!((phase3_logdensity(&p, y, a, b, z) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn subject_complete_term_count_t3() {
        // T = 3: one feedback transition, the reversal pair, the outcome.
        let p = zero_params();
        let ds = PanelDataset::new(
            1,
            3,
            vec![0, 1, 1],
            vec![0.0, 0.0, 0.0],
            vec![1],
            None,
        )
        .unwrap();
        let v = subject_complete_logdensity(&p, 0, &ds, &LatentState::zero()).unwrap();
        let expect = 0.5f64.ln() * 2.0 - 0.5 * LN_2PI * 2.0 + 0.5f64.ln();
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn subject_complete_is_sum_of_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = demo_params();
        let ds = random_dataset(&mut rng, 6, 5);
        for i in 0..ds.n_subjects() {
            let lat = LatentState {
                u_a: rng.random::<f64>() - 0.5,
                u_b: rng.random::<f64>() - 0.5,
                z: rng.random::<f64>() - 0.5,
            };
            let t = ds.n_times();
            let mut expect = 0.0;
            for c in 1..t - 1 {
                expect += phase1_logdensity(&p, ds.a(i, c - 1), ds.b(i, c - 1), ds.a(i, c), ds.b(i, c), &lat);
            }
            expect += phase2_logdensity(&p, ds.a(i, t - 1), ds.b(i, t - 1), lat.z);
            expect += phase3_logdensity(&p, ds.y(i), ds.a(i, t - 1), ds.b(i, t - 1), lat.z);
            let got = subject_complete_logdensity(&p, i, &ds, &lat).unwrap();
            assert!((got - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn subject_index_out_of_range_errors() {
        let ds = PanelDataset::new(1, 3, vec![0, 1, 1], vec![0.0; 3], vec![1], None).unwrap();
        assert!(subject_complete_logdensity(&demo_params(), 1, &ds, &LatentState::zero()).is_err());
    }

    #[test]
    fn structural_factorization_separates_latents() {
        // Perturbing z must shift the density by exactly the reversal/outcome
        // difference, and perturbing (u_a, u_b) must not touch those terms.
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let p = demo_params();
        let ds = random_dataset(&mut rng, 4, 5);
        for i in 0..ds.n_subjects() {
            let base = LatentState {
                u_a: 0.3,
                u_b: -0.4,
                z: 0.5,
            };
            let moved_z = LatentState { z: -1.2, ..base };
            let d_complete = subject_complete_logdensity(&p, i, &ds, &moved_z).unwrap()
                - subject_complete_logdensity(&p, i, &ds, &base).unwrap();
            let d_reversal = subject_reversal_outcome_loglik(&p, &ds, i, moved_z.z)
                - subject_reversal_outcome_loglik(&p, &ds, i, base.z);
            assert!((d_complete - d_reversal).abs() < 1e-12);

            let moved_u = LatentState {
                u_a: -0.9,
                u_b: 1.1,
                ..base
            };
            let d_complete = subject_complete_logdensity(&p, i, &ds, &moved_u).unwrap()
                - subject_complete_logdensity(&p, i, &ds, &base).unwrap();
            let d_feedback = subject_feedback_loglik(&p, &ds, i, moved_u.u_a, moved_u.u_b)
                - subject_feedback_loglik(&p, &ds, i, base.u_a, base.u_b);
            assert!((d_complete - d_feedback).abs() < 1e-12);
        }
    }

    #[test]
    fn latent_logprior_trivial_values() {
        let p = zero_params();
        let v = latent_logprior(&LatentState::zero(), &p);
        assert!((v - (-LN_2PI - 0.5 * LN_2PI)).abs() < 1e-12);
        assert!((std_normal_logpdf(0.0) - (-0.5 * LN_2PI)).abs() < 1e-12);
    }

    #[test]
    fn latent_logprior_matches_formula_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let p = demo_params();
        for _ in 0..100 {
            let lat = LatentState {
                u_a: rng.random::<f64>() * 4.0 - 2.0,
                u_b: rng.random::<f64>() * 4.0 - 2.0,
                z: rng.random::<f64>() * 4.0 - 2.0,
            };
            let oracle = crate::math::bvn_logpdf(lat.u_a, lat.u_b, p.tau_a, p.tau_b, p.rho).unwrap()
                + normal_logpdf(lat.z, 0.0, 1.0);
            assert!((latent_logprior(&lat, &p) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_in_alpha0() {
        // Success log-mass for a_cur = 1 strictly increases with alpha0.
        let mut prev = f64::NEG_INFINITY;
        for k in 0..20 {
            let mut p = demo_params();
            p.alpha0 = -2.0 + 0.25 * k as f64;
            let v = phase1_logdensity(&p, 1, 0.5, 1, 0.0, &LatentState::zero());
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn normalization_enumeration_oracle_t3() {
        // With one subject at T = 3, summing the complete-data mass over all
        // binary outcomes and integrating the two continuous observations on
        // a dense grid must give total mass 1 (the initial pair is
        // conditioned on).
        let p = demo_params();
        let lat = LatentState {
            u_a: 0.2,
            u_b: -0.3,
            z: 0.4,
        };
        let (a1, b1) = (1u8, 0.5f64);
        let grid_n = 801usize;
        let lo = -12.0;
        let hi = 12.0;
        let h = (hi - lo) / (grid_n - 1) as f64;
        let mut total = 0.0;
        for a2 in [0u8, 1] {
            for a3 in [0u8, 1] {
                for y in [0u8, 1] {
                    let mut inner = 0.0;
                    for j2 in 0..grid_n {
                        let b2 = lo + (j2 as f64) * h;
                        let w2 = if j2 == 0 || j2 == grid_n - 1 { 0.5 } else { 1.0 };
                        let mut inner3 = 0.0;
                        for j3 in 0..grid_n {
                            let b3 = lo + (j3 as f64) * h;
                            let w3 = if j3 == 0 || j3 == grid_n - 1 { 0.5 } else { 1.0 };
                            let ld = phase1_logdensity(&p, a1, b1, a2, b2, &lat)
                                + phase2_logdensity(&p, a3, b3, lat.z)
                                + phase3_logdensity(&p, y, a3, b3, lat.z);
                            inner3 += w3 * ld.exp();
                        }
                        inner += w2 * inner3;
                    }
                    total += inner * h * h;
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-4, "total mass {total}");
    }

    #[test]
    fn complete_grad_z_prior_block_zero_at_origin() {
        let ds = PanelDataset::empty(3);
        let priors = PriorConfig::default();
        let u = zero_params().unconstrain();
        let (_, grad) = complete_logdensity_grad(&u, &[], &ds, &priors).unwrap();
        assert_eq!(grad.len(), N_PARAMS);
        // With no data, every coefficient gradient is the prior gradient,
        // which vanishes at 0.
        for &i in &crate::params::COEF_INDICES {
            assert!(grad[i].abs() < 1e-12);
        }
    }

    #[test]
    fn complete_grad_value_matches_summed_phase_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let p = demo_params();
        let ds = random_dataset(&mut rng, 8, 5);
        let latents: Vec<LatentState> = (0..8)
            .map(|_| LatentState {
                u_a: rng.random::<f64>() - 0.5,
                u_b: rng.random::<f64>() - 0.5,
                z: rng.random::<f64>() - 0.5,
            })
            .collect();
        let priors = PriorConfig::default();
        let u = p.unconstrain();
        let (value, _) = complete_logdensity_grad(&u, &latents, &ds, &priors).unwrap();

        let (theta, log_jac) = u.constrain();
        let mut expect = log_jac;
        let mut grad_scratch = [0.0; N_PARAMS];
        expect += priors.logpdf_grad(&theta, &mut grad_scratch);
        for (i, lat) in latents.iter().enumerate() {
            expect += subject_complete_logdensity(&theta, i, &ds, lat).unwrap();
            expect += latent_logprior(lat, &theta);
        }
        assert!((value - expect).abs() < 1e-10, "{value} vs {expect}");
    }

    #[test]
    fn complete_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let ds = random_dataset(&mut rng, 5, 4);
        let priors = PriorConfig::default();
        let target = JointPosterior::full(&ds, priors);
        let dim = target.dim();

        for trial in 0..10 {
            let state: Vec<f64> = (0..dim)
                .map(|_| rng.random::<f64>() * 1.6 - 0.8)
                .collect();
            let mut grad = vec![0.0; dim];
            let value = target.logp_grad(&state, &mut grad);
            assert!(value.is_finite());

            let mut scratch = vec![0.0; dim];
            for j in 0..dim {
                let h = 1e-5 * (1.0 + state[j].abs());
                let mut up = state.clone();
                let mut dn = state.clone();
                up[j] += h;
                dn[j] -= h;
                let fu = target.logp_grad(&up, &mut scratch);
                let fd = target.logp_grad(&dn, &mut scratch);
                let fd_grad = (fu - fd) / (2.0 * h);
                let denom = grad[j].abs().max(fd_grad.abs()).max(1.0);
                assert!(
                    ((grad[j] - fd_grad) / denom).abs() < 1e-6,
                    "trial {trial} dim {j}: analytic {} vs fd {}",
                    grad[j],
                    fd_grad
                );
            }
        }
    }

    #[test]
    fn pinned_posterior_drops_pinned_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let ds = random_dataset(&mut rng, 4, 4);
        let priors = PriorConfig::default();
        // GLMM restriction: no cross-lags, no latent-trait slopes, no z.
        let pins = [(2usize, 0.0), (5, 0.0), (7, 0.0), (9, 0.0), (13, 0.0)];
        let target = JointPosterior::with_pins(&ds, priors, &pins, false);
        assert_eq!(target.n_free(), 14);
        assert_eq!(target.dim(), 14 + 2 * 4);

        let state: Vec<f64> = (0..target.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut grad = vec![0.0; target.dim()];
        let v = target.logp_grad(&state, &mut grad);
        assert!(v.is_finite());

        // Finite differences must agree for the restricted target too.
        let mut scratch = vec![0.0; target.dim()];
        for j in 0..target.dim() {
            let h = 1e-5;
            let mut up = state.clone();
            let mut dn = state.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (target.logp_grad(&up, &mut scratch) - target.logp_grad(&dn, &mut scratch))
                / (2.0 * h);
            let denom = grad[j].abs().max(fd.abs()).max(1.0);
            assert!(((grad[j] - fd) / denom).abs() < 1e-6);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let ds = PanelDataset::new(2, 3, vec![0, 1, 1, 0, 0, 1], vec![0.0; 6], vec![1, 0], None)
            .unwrap();
        let u = demo_params().unconstrain();
        let err = complete_logdensity_grad(&u, &[LatentState::zero()], &ds, &PriorConfig::default());
        assert!(err.is_err());
    }

    #[test]
    fn logit_round_trip_sanity() {
        assert!((inv_logit(logit(0.3)) - 0.3).abs() < 1e-12);
    }
}
