use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by model construction and probability queries.
///
/// Validation errors always carry the measured residual so a caller can see
/// how far off an input was.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation failed: {what} (residual {residual:e}, tolerance {tolerance:e})")]
    Validation {
        what: String,
        residual: f64,
        tolerance: f64,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("zero-probability branch: weight {weight:e} is below {tolerance:e}")]
    ZeroWeight { weight: f64, tolerance: f64 },
    #[error("incompatible boundary conditions: normalization {denominator:e} is not positive")]
    IncompatibleBoundary { denominator: f64 },
    #[error("model validity: {0}")]
    ModelValidity(String),
    #[error(
        "capacity exceeded: {count} records exceed the enumeration cap of {cap}; \
         use Monte Carlo estimation (`twotime sample`) instead"
    )]
    Capacity { count: u128, cap: u128 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(what: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Error::Validation {
            what: what.into(),
            residual,
            tolerance,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
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
