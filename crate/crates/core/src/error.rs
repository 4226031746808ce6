use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid tree: {0}")]
    Validation(String),

    #[error("transition {transition} is not permissible in the current configuration")]
    NotPermissible { transition: String },

    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),

    #[error("decoding constraint leaves no admissible hypothesis")]
    InfeasibleConstraint,

    #[error("corpora are misaligned at sentence {index}: {message}")]
    Alignment { index: usize, message: String },

    #[error("sentence {index}: {source}")]
    Sentence {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_sentence(self, index: usize) -> Self {
        Error::Sentence {
            index,
            source: Box::new(self),
        }
    }
}
