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

    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },

    #[error("document {doc_id}: {field}: {message}")]
    Invariant {
        doc_id: String,
        field: String,
        message: String,
    },

    #[error("duplicate doc_id {0}")]
    DuplicateDoc(String),

    #[error("empty split")]
    EmptySplit,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown token id {0} and no UNK fallback")]
    UnknownToken(usize),

    #[error("{0}")]
    Invalid(String),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invariant(doc_id: impl Into<String>, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant {
            doc_id: doc_id.into(),
            field: field.into(),
            message: message.into(),
        }
    }
}
