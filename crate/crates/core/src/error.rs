use thiserror::Error;

/// Errors raised by the copula library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data violates an invariant (margins, normalization, shapes).
    #[error("validation error: {0}")]
    Validation(String),

    /// A table margin deviates from 1/m by more than the ingestion tolerance.
    #[error(
        "non-uniform margin on axis {axis} at index {index}: sum {value:.9} differs from {expected:.9}"
    )]
    NonUniformMargin {
        axis: usize,
        index: usize,
        value: f64,
        expected: f64,
    },

    /// The requested combination is not supported (e.g. unequal grid sizes).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical routine failed (non-convergence, broken bound, non-PD matrix).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Configuration is incomplete or inconsistent.
    #[error("configuration error in field `{field}`: {message}")]
    Config { field: String, message: String },

    /// A text input could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
