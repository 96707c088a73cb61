//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Mathematically ill-posed request (non-integrable singularity,
    /// divergent jump integral, heavy-tailed driver where second moments
    /// are required, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("solver did not converge: residual {residual:.3e} after {steps} steps (tol {tol:.3e})")]
    NonConvergence {
        residual: f64,
        tol: f64,
        steps: usize,
        history: Vec<f64>,
    },

    #[error("domain too small: boundary mass {mass:.3e} exceeds limit {limit:.3e}")]
    DomainTooSmall { mass: f64, limit: f64 },

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
