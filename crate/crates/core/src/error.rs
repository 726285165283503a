use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input value violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A file could not be parsed; names the file and line.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Two artifacts that must share a configuration do not.
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    /// A queried word is not in the vocabulary.
    #[error("out-of-vocabulary word: {0:?}")]
    OutOfVocabulary(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("metadata: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
