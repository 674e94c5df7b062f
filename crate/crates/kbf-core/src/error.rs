use thiserror::Error;

/// Errors surfaced by the numerical kernels, the scenario generator and
/// the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} is {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not positive semidefinite: diagonal entry {index} is {value:.3e}")]
    NotPsd { index: usize, value: f64 },

    #[error("{op} did not converge after {iterations} iterations")]
    NonConvergence { op: &'static str, iterations: usize },

    #[error("non-finite value encountered in {op}")]
    NonFinite { op: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no finite loading can reach condition number 1 for distinct eigenvalues")]
    InfeasibleLoading,

    #[error("requested WNG floor {w_min_db:.4} dB exceeds the array maximum {max_db:.4} dB")]
    WngFloorTooHigh { w_min_db: f64, max_db: f64 },

    #[error("scenario configuration error: {0}")]
    Config(String),

    #[error("snapshot file format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
