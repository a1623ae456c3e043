use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller handed in something malformed (bad dimension, empty set,
    /// out-of-range parameter).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two vectors or point sets disagree on spatial/feature dimension.
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    /// A linear-algebra step failed (singular system, non-finite values,
    /// covariance that lost positive definiteness).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The communication graph lost connectivity under the abort policy.
    #[error("communication graph disconnected at step {step}")]
    Disconnected { step: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
