//! Library-wide error type.

use thiserror::Error;

/// Errors produced by game construction, solvers, samplers, and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Shape mismatch between tensors, policies, or seat counts.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A probability row did not normalise or contained negative mass.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// A scalar parameter was outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An iterative solver exhausted its iteration budget.
    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    /// A sampler chain aborted, e.g. on a non-finite gradient.
    #[error("chain aborted at step {step}: {reason}")]
    ChainAborted { step: usize, reason: String },

    /// Inputs required by an operation were absent.
    #[error("missing input: {0}")]
    MissingInput(String),

    /// Environment layout could not be built.
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
