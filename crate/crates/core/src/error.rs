use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}: missing required column `{column}`")]
    Schema { path: PathBuf, column: String },

    #[error("{path}:{line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{metric} is undefined: {reason}")]
    UndefinedMetric { metric: String, reason: String },

    #[error("unrecognised format: {0}")]
    Format(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("meter failure: {0}")]
    Meter(String),

    #[error("command error: {0}")]
    Command(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn undefined(metric: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::UndefinedMetric {
            metric: metric.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than by the environment.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::Schema { .. }
                | Error::Row { .. }
                | Error::Format(_)
                | Error::Conflict(_)
                | Error::Range(_)
                | Error::Usage(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
