use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("document {0:?} is empty")]
    EmptyDocument(String),

    #[error("windows leave positions {start}..{end} uncovered")]
    CoverageGap { start: usize, end: usize },

    #[error("non-finite value in embedding row {position}")]
    NonFinite { position: usize },

    #[error("zero-norm vector at row {index}")]
    ZeroVector { index: usize },

    #[error("malformed interchange data: {0}")]
    Format(String),

    #[error("embedding provider failed on document {doc_id:?}: {message}")]
    Provider { doc_id: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }
}
