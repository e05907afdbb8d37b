use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or flags; nothing was read or written.
    #[error("invalid configuration: {0}")]
    Validation(String),
    /// Input data could not be loaded or processed.
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(1),
            CliError::Data(_) => ExitCode::from(2),
        }
    }
}
