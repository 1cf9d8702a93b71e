use std::path::PathBuf;

use thiserror::Error;

/// Every failure the pipeline can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: malformed record: {message}")]
    Malformed { file: String, line: usize, message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid template: {0}")]
    Template(String),

    #[error("embedding error: {0}")]
    Embedding(String),

    #[error("missing embedding for key {0:?}")]
    MissingKey(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("embedding file: {0}")]
    EmbFormat(String),

    #[error("prompt construction: {0}")]
    Prompt(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("unknown relation {0:?}")]
    UnknownRelation(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("sampling: {0}")]
    Sampling(String),

    #[error("metric: {0}")]
    Metric(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("config: {0}")]
    Config(String),

    #[error("convert: {0}")]
    Convert(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
