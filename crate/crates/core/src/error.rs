use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("merge rule error for key `{key}`: {reason}")]
    Rule { key: String, reason: String },

    #[error("no tag records given")]
    EmptyRecords,

    #[error("record has an empty font id (line {line})")]
    EmptyFontId { line: usize },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("no entry for id `{0}`")]
    MissingId(String),

    #[error("tag `{0}` is not in the vocabulary")]
    UnknownTag(String),

    #[error("tag index {index} out of range for vocabulary of size {size}")]
    TagIndexOutOfRange { index: usize, size: usize },

    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("value at position {index} is not finite")]
    NonFinite { index: usize },

    #[error("value at position {index} is negative")]
    Negative { index: usize },

    #[error("no exemplars to score against")]
    NoExemplars,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("class weight undefined: tag has no training samples")]
    UndefinedWeight,

    #[error("hyperparameter grid is empty")]
    EmptyGrid,

    #[error("item `{item}` has unknown genre `{genre}`")]
    UnknownGenre { item: String, genre: String },

    #[error("item `{item}`: {source}")]
    Item {
        item: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn rule(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Rule {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(path: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
