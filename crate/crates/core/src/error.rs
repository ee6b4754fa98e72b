use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A NaN reached the sampler. Always a model or numerical bug.
    #[error("non-finite value (NaN) in {context}")]
    NaN { context: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("index {index} out of range for {len} groups")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance block is not positive definite after jitter")]
    NotPositiveDefinite,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn nan(context: impl Into<String>) -> Self {
        Error::NaN {
            context: context.into(),
        }
    }
}
