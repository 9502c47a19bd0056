use thiserror::Error;

/// Errors raised by the sampling toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("step-size regime violated: {0}")]
    RegimeViolation(String),
    #[error("target is missing {0}")]
    MissingTargetData(&'static str),
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("empty measure")]
    EmptyMeasure,
    #[error("{count} points exceed the exact transport cap of {cap}; subsample first")]
    CapExceeded { count: usize, cap: usize },
    #[error("image format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}

pub(crate) fn check_finite(context: &'static str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}
