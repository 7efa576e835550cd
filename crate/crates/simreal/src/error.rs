use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    AgreementFail = 1,
    Config = 2,
    IoParse = 3,
    ModelDataMismatch = 4,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("model/data mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Core(#[from] simreal_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::Config,
            CliError::Io { .. } | CliError::Parse { .. } => ExitCode::IoParse,
            CliError::Mismatch(_) => ExitCode::ModelDataMismatch,
            CliError::Core(e) => match e {
                simreal_core::Error::Config(_) => ExitCode::Config,
                simreal_core::Error::Shape { .. } => ExitCode::ModelDataMismatch,
                _ => ExitCode::IoParse,
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
