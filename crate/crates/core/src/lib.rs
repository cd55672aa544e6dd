//! Three-phase hierarchical joint model for longitudinal panel data.
//!
//! The model couples a binary covariate series `A` and a continuous covariate
//! series `B` through three phases:
//!
//! 1. a feedback phase where each series depends on both lagged series plus a
//!    correlated pair of subject random intercepts,
//! 2. a reversal phase where the final observations of both series are driven
//!    by a shared standard-normal latent trait instead of their own history,
//! 3. an outcome phase where a final binary endpoint depends on the reversal
//!    observations and the latent trait.
//!
//! The crate provides exact log-density kernels with analytic gradients, a
//! seeded simulator, marginal maximum likelihood via adaptive Gauss-Hermite
//! quadrature, a self-contained No-U-Turn sampler with convergence
//! diagnostics, the benchmark comparator models, evaluation metrics, and a
//! simulation-study driver with report emission.

pub mod comparators;
pub mod config;
pub mod data;
pub mod error;
pub mod math;
pub mod metrics;
pub mod mle;
pub mod model;
pub mod params;
pub mod quad;
pub mod report;
pub mod sampler;
pub mod simulate;
pub mod study;

pub use data::PanelDataset;
pub use error::Error;
pub use params::{LatentState, PriorConfig, StructuralParams, UnconstrainedParams};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
