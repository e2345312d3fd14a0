use std::process::ExitCode;

use savcd_core::error::EngineError;
use savcd_core::sas::SasError;
use savcd_core::BackendError;

/// Failure classes with fixed process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config file, script or grid. Exit 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Transport, server or logit-shape failure. Exit 3.
    #[error("backend error: {0}")]
    Backend(String),
    /// Unreadable or unwritable image or output file. Exit 4.
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidParams(_) => CliError::Config(e.to_string()),
            EngineError::ImageMismatch(..) => CliError::Io(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::InvalidScript(_) => CliError::Config(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<SasError> for CliError {
    fn from(e: SasError) -> Self {
        match e {
            SasError::EmptyQuery => CliError::Config(e.to_string()),
            SasError::Backend(b) => b.into(),
        }
    }
}

/// Exit code for an error chain: the first [`CliError`] found, else 1.
pub fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    let code = err
        .chain()
        .find_map(|e| e.downcast_ref::<CliError>())
        .map_or(1, CliError::exit_code);
    ExitCode::from(code)
}
