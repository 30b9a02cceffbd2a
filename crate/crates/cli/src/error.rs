use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid value for `{key}`: {message} (example: {example})")]
    Config {
        key: &'static str,
        message: String,
        example: &'static str,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}, line {line}: {message}")]
    Data {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Core(#[from] ordreg_core::Error),
}

impl CliError {
    pub(crate) fn config(key: &'static str, message: impl ToString, example: &'static str) -> Self {
        CliError::Config {
            key,
            message: message.to_string(),
            example,
        }
    }

    pub(crate) fn io(path: &Path, err: impl ToString) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
