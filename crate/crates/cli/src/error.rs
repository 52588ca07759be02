use cvdiscord_core::Error as CoreError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config, or input files.
    #[error("{0}")]
    Validation(String),
    /// Failure while computing or writing results.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::MalformedInput(_)
            | CoreError::Domain(_)
            | CoreError::NonPhysical(_)
            | CoreError::IncompleteInput(_)
            | CoreError::DimensionMismatch(..)
            | CoreError::Parse { .. }
            | CoreError::Json(_) => CliError::Validation(msg),
            CoreError::Numeric { .. }
            | CoreError::Truncation { .. }
            | CoreError::DegenerateSplit { .. }
            | CoreError::InsufficientData(_)
            | CoreError::Io(_)
            | CoreError::Csv(_) => CliError::Runtime(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
