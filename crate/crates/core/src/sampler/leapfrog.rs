//! Diagonal-metric phase-space state and the symplectic leapfrog integrator.

use rand::Rng;
use rand_distr::StandardNormal;

use super::LogDensityGradient;

/// Diagonal Euclidean metric. `inv_mass` is the inverse mass vector, which
/// adaptation sets to the estimated posterior variances.
#[derive(Debug, Clone)]
pub struct Metric {
    inv_mass: Vec<f64>,
}

impl Metric {
    pub fn unit(dim: usize) -> Self {
        Self {
            inv_mass: vec![1.0; dim],
        }
    }

    pub fn from_variances(variances: Vec<f64>) -> Self {
        Self {
            inv_mass: variances,
        }
    }

    pub fn inv_mass(&self) -> &[f64] {
        &self.inv_mass
    }

    /// Draws momentum ~ N(0, M) where M is the mass matrix (inverse of
    /// `inv_mass` elementwise).
    pub fn sample_momentum<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.inv_mass
            .iter()
            .map(|&im| {
                let n: f64 = rng.sample(StandardNormal);
                n / im.sqrt()
            })
            .collect()
    }

    /// Kinetic energy ½ pᵀ M⁻¹ p.
    pub fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p
            .iter()
            .zip(&self.inv_mass)
            .map(|(&pi, &im)| pi * pi * im)
            .sum::<f64>()
    }
}

/// Position, momentum, cached log density and gradient.
#[derive(Debug, Clone)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub logp: f64,
    pub grad: Vec<f64>,
}

impl PhaseState {
    pub fn new<T: LogDensityGradient + ?Sized>(target: &T, q: Vec<f64>, p: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let logp = target.logp_grad(&q, &mut grad);
        Self { q, p, logp, grad }
    }

    /// Hamiltonian −log π(q) + ½ pᵀ M⁻¹ p.
    pub fn hamiltonian(&self, metric: &Metric) -> f64 {
        -self.logp + metric.kinetic(&self.p)
    }
}

/// One leapfrog step of size `eps` in direction `dir` (±1), in place.
pub fn leapfrog_step<T: LogDensityGradient + ?Sized>(
    target: &T,
    state: &mut PhaseState,
    metric: &Metric,
    eps: f64,
    dir: f64,
) {
    let h = eps * dir;
    for (pi, gi) in state.p.iter_mut().zip(&state.grad) {
        *pi += 0.5 * h * gi;
    }
    for ((qi, pi), im) in state.q.iter_mut().zip(&state.p).zip(metric.inv_mass()) {
        *qi += h * pi * im;
    }
    state.logp = target.logp_grad(&state.q, &mut state.grad);
    for (pi, gi) in state.p.iter_mut().zip(&state.grad) {
        *pi += 0.5 * h * gi;
    }
}

/// Integrates `n_steps` forward leapfrog steps from `(position, momentum)`
/// with unit metric and returns the final pair. Exactly time-reversible:
/// integrating the result backwards (negated momentum) recovers the start.
pub fn leapfrog<T: LogDensityGradient + ?Sized>(
    target: &T,
    position: &[f64],
    momentum: &[f64],
    step_size: f64,
    n_steps: usize,
) -> (Vec<f64>, Vec<f64>) {
    let metric = Metric::unit(position.len());
    let mut state = PhaseState::new(target, position.to_vec(), momentum.to_vec());
    for _ in 0..n_steps {
        leapfrog_step(target, &mut state, &metric, step_size, 1.0);
    }
    (state.q, state.p)
}
