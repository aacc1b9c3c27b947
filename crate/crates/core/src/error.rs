use thiserror::Error;

/// Errors raised by the depth library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DepthError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("functions live on different grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {required} observations, got {got}")]
    InsufficientSample { required: usize, got: usize },

    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("degenerate model: no eigenvalue reaches the threshold {delta:e}")]
    DegenerateModel { delta: f64 },

    #[error("eigenvalue {index} is zero and cannot be inverted")]
    ZeroEigenvalue { index: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix condition number {0:e} exceeds the allowed bound")]
    IllConditioned(f64),

    #[error("reference set is empty")]
    EmptyReference,

    #[error("constant weights diverge on infinite-dimensional models")]
    DivergentWeights,
}

pub type Result<T> = std::result::Result<T, DepthError>;
