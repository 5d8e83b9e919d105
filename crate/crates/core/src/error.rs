use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("point {index} exceeds the reference point")]
    ReferenceViolation { index: usize },

    #[error("{got} models exceed the matrix capacity of {capacity} rows")]
    Capacity { capacity: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("no feature vector for front `{0}`")]
    Lookup(String),

    #[error("non-finite or out-of-range value: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
