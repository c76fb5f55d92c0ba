use std::path::PathBuf;

use thiserror::Error;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Validation, precondition or verification failure, and usage errors.
pub const EXIT_INVALID: i32 = 1;
/// A capacity guard tripped.
pub const EXIT_CAPACITY: i32 = 2;
/// Reading or writing a file failed.
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),

    #[error("`{path}` is not valid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{0}")]
    Format(String),

    #[error("{0}")]
    Usage(String),

    #[error("verification failed: {0}")]
    Check(String),

    #[error(transparent)]
    Core(#[from] maxleak::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Output(_) => EXIT_IO,
            CliError::Core(maxleak::Error::Capacity { .. }) => EXIT_CAPACITY,
            _ => EXIT_INVALID,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
