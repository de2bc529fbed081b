use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column {column:?}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("duplicate feature vector at rows {first} and {second}")]
    DuplicateRow { first: usize, second: usize },

    #[error("value out of range at row {row}, column {column:?}: {value}")]
    Range { row: usize, column: String, value: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("division domain error: {0}")]
    DivisionDomain(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("{family} curve cannot be fitted: {reason}")]
    CurveDomain { family: String, reason: String },

    #[error("no learning-curve family could be fitted")]
    NoFit,

    #[error("unsupported feature {feature:?}: {reason}")]
    UnsupportedFeature { feature: String, reason: String },

    #[error("generation error: {0}")]
    Generation(String),

    #[error("dataset {name:?}: {source}")]
    Dataset {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that originate in the data rather than in the
    /// caller's configuration.
    pub fn is_dataset_error(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Parse { .. }
                | Error::DuplicateRow { .. }
                | Error::Range { .. }
                | Error::Dataset { .. }
                | Error::Io { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
