use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("line {line}: unknown value {value:?} for context dimension {dimension:?}")]
    UnknownContextValue {
        line: u64,
        dimension: String,
        value: String,
    },

    #[error("line {line}: rating {value} outside [{min}, {max}]")]
    RatingOutOfRange { line: u64, value: i64, min: u8, max: u8 },

    #[error("line {line}: duplicate rating for user {user:?}, item {item:?} in the same situation")]
    DuplicateCell { line: u64, user: String, item: String },

    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("unknown user {0:?}")]
    UnknownUser(String),

    #[error("unknown virtual user {user:?}-{label}")]
    UnknownVirtualUser { user: String, label: usize },

    #[error("user {0:?} has no ratings")]
    NoRatings(String),

    #[error("user {0:?} has no virtual users")]
    NoVirtualUsers(String),

    #[error("no context clustering for user {0:?}")]
    MissingClustering(String),

    #[error("situation index {index} outside [0, {count})")]
    InvalidSituation { index: usize, count: usize },

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty training input")]
    EmptyInput,

    #[error("cannot aggregate an empty list of ratings")]
    EmptyList,

    #[error("cannot build a model from an empty space")]
    EmptySpace,

    #[error("cube holds no ratings")]
    EmptyCube,

    #[error("relevant set is empty")]
    EmptyRelevantSet,

    #[error("system was not trained on the supplied training cube")]
    UntrainedSystem,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
