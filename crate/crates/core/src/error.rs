use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("support violation: {0}")]
    Support(String),

    #[error("exponent p = {0} is outside (1, inf)")]
    InvalidExponent(f64),

    #[error("threshold must be non-negative, got {0}")]
    NegativeThreshold(f64),

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
