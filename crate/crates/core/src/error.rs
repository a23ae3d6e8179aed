use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed fully-qualified name `{0}`: expected at least 3 dot-separated identifiers")]
    MalformedFqn(String),

    #[error("line {line}: {message}")]
    Ingest { line: usize, message: String },

    #[error("embedding provider failed on thread {thread_id}, pair {pair_index}: {message}")]
    Provider {
        thread_id: u64,
        pair_index: usize,
        message: String,
    },

    #[error("provider connection error: {0}")]
    Connection(String),

    #[error("training requires both labels, got {positives} positive and {negatives} negative examples")]
    SingleClass { positives: usize, negatives: usize },

    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("model file {path}: {message}")]
    ModelLoad { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("unknown API `{0}`")]
    UnknownApi(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }
}
