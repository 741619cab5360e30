use alloc::string::String;

use crate::rates::RateBranch;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid of size {grid_size} is too coarse, need at least {required}")]
    GridTooCoarse { grid_size: usize, required: usize },

    #[error("function is not even: r_k != r_-k")]
    NotEven,

    #[error("function has no Fourier representation")]
    MissingFourier,

    #[error("path has lag extension {available}, operation needs {required}")]
    InsufficientExtension { required: usize, available: usize },

    #[error("functional expects arity {expected}, got window of {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("matrix order {order} exceeds the dense limit {limit}")]
    SizeLimit { order: usize, limit: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadratic form is singular; maximizer is not unique")]
    SingularSystem,

    #[error("closed form does not apply (branch {0:?})")]
    NotClosedForm(RateBranch),

    #[error("evaluation routes disagree: {first} vs {second}")]
    InternalConsistency { first: f64, second: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
