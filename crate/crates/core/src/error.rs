//! Crate error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("subject index {index} out of range (n_subjects = {n_subjects})")]
    SubjectIndex { index: usize, n_subjects: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("Newton mode search failed to converge for subject {subject} after {iterations} iterations")]
    LaplaceNonConvergence { subject: usize, iterations: usize },

    #[error("sampler error: {0}")]
    Sampler(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("study error: {0}")]
    Study(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("toml parse error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("toml write error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}
