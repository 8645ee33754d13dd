use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the training, inference and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("label error at row {row}, column {column}: value `{value}` is not 0 or 1")]
    Label {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("unsupported attribute `{name}`: {reason}")]
    UnsupportedAttribute { name: String, reason: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite objective at optimizer iteration {iteration}")]
    Numeric { iteration: usize },

    #[error("EM objective decreased by {decrease:e} at iteration {iteration}")]
    EmMonotonicity { iteration: usize, decrease: f64 },

    #[error("exhaustive enumeration refused for d = {d} (limit {limit})")]
    EnumerationGuard { d: usize, limit: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("model format: {0}")]
    Format(String),
}

impl Error {
    /// Stable machine-readable code, printed by the CLI before the human message.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "E_PARSE",
            Error::Schema(_) => "E_SCHEMA",
            Error::Label { .. } => "E_LABEL",
            Error::UnsupportedAttribute { .. } => "E_UNSUPPORTED_ATTRIBUTE",
            Error::Argument(_) => "E_ARGUMENT",
            Error::Numeric { .. } => "E_NUMERIC",
            Error::EmMonotonicity { .. } => "E_EM_MONOTONICITY",
            Error::EnumerationGuard { .. } => "E_GUARD",
            Error::Io { .. } => "E_IO",
            Error::Format(_) => "E_FORMAT",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
