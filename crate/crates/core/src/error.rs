use thiserror::Error;

/// Errors raised by the simulation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },

    #[error("register of {width} qubits exceeds the limit of {limit}")]
    TooWide { width: usize, limit: usize },

    #[error("operator is not Hermitian (max imaginary coefficient {0:e})")]
    NotHermitian(f64),

    #[error("circuit parameter {0} is unbound")]
    UnboundParameter(usize),

    #[error("expected {expected} parameters, got {actual}")]
    ParameterCount { expected: usize, actual: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("optimizer diverged: {0}")]
    Diverged(String),

    #[error("eigendecomposition did not converge")]
    NoConvergence,

    #[error("both scattering rates are zero; lifetime is infinite")]
    InfiniteLifetime,

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
