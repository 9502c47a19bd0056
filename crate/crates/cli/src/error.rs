use thiserror::Error;

/// Failure of a CLI command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("regime violation: {0}")]
    Regime(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Regime(_) => 3,
            CliError::Io(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<pdlangevin::Error> for CliError {
    fn from(e: pdlangevin::Error) -> Self {
        use pdlangevin::Error as E;
        match e {
            E::RegimeViolation(_) => CliError::Regime(e.to_string()),
            E::Io(_) | E::Format(_) => CliError::Io(e.to_string()),
            E::InvalidParameter(_) | E::MissingTargetData(_) | E::DimensionMismatch { .. } => CliError::Config(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
