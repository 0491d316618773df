use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library. Judge transport failures have their own
/// type in [`crate::judge::JudgeError`] and are wrapped here when they cross
/// module boundaries.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Invariant { field: String, message: String },

    #[error("group size must be at least 2, got {0}")]
    GroupTooSmall(usize),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("token id {0} is not in the vocabulary")]
    UnknownToken(u32),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("checkpoint version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },

    #[error("unknown {kind} `{name}`; registered: {available}")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error(transparent)]
    Judge(#[from] crate::judge::JudgeError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
