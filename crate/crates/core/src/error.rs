use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("word index {index} out of range for {len} words")]
    WordIndexOutOfRange { index: usize, len: usize },

    #[error("token position {position} out of range for {len} tokens")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("input needs {required} positions but the model allows {allowed}")]
    SequenceTooLong { required: usize, allowed: usize },

    #[error("malformed model input: {0}")]
    MalformedInput(String),

    #[error("k must be at least 1")]
    ZeroK,

    #[error("candidate '{0}' is not in the candidate set")]
    CandidateNotInSet(String),

    #[error("no candidates")]
    NoCandidates,

    #[error("cannot rank an empty score list")]
    EmptyScores,

    #[error("score list contains NaN")]
    NanScore,

    #[error("rank matrix shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{what}: expected {expected} entries, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("target not found: '{0}'")]
    TargetNotFound(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("{source_name}: line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    // the io error is part of the message rather than a chained source, so
    // `{:#}` reports do not print it twice
    #[error("read failed at byte offset {offset}: {cause}")]
    Read { offset: u64, cause: io::Error },

    #[error("{}: {cause}", path.display())]
    Io { path: PathBuf, cause: io::Error },

    #[error("model: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, cause: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause,
        }
    }
}
