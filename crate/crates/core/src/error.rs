use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported marginal family: {0}")]
    UnsupportedFamily(String),

    #[error("invalid parameters for {family}: {reason}")]
    InvalidParameters { family: String, reason: String },

    #[error("value {value} outside support [{lower}, {upper}]")]
    OutOfSupport { value: f64, lower: f64, upper: f64 },

    #[error("basis order {order} exceeds the available maximum {max}")]
    OrderOutOfRange { order: usize, max: usize },

    #[error("input index {index} out of range for dimension {dim}")]
    InputOutOfRange { index: usize, dim: usize },

    #[error("finite element assembly failed: {0}")]
    Assembly(String),

    #[error("spectral computation failed: {0}")]
    Spectral(String),

    #[error("hyperbolic truncation requires q in (0, 1], got {0}")]
    InvalidQuasiNorm(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular regression matrix")]
    Singular,

    #[error("regression problem contains non-finite entries")]
    NonFinite,

    #[error("expansion has no constant term")]
    MissingConstant,

    #[error("total variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
