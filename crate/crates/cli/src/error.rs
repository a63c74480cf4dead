use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Failures grouped by who has to fix them; each maps to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<mar_core::Error> for CliError {
    fn from(e: mar_core::Error) -> Self {
        use mar_core::Error as E;
        match e {
            E::InvalidGeometry(_) | E::InvalidSpectrum(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
