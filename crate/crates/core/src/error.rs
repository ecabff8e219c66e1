use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("map error: {0}")]
    Map(String),

    #[error("could not place {requested} vehicles without overlap (placed {placed})")]
    Placement { requested: usize, placed: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown reward variant `{0}`")]
    UnknownVariant(String),

    #[error("skip scheme has no factor for action {0}")]
    MissingSkipFactor(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("non-finite loss {loss} at update {update}")]
    NonFiniteLoss { loss: f64, update: u64 },

    #[error("replay store is empty (no sealed fragments)")]
    EmptyStore,

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("bad replay store: {0}")]
    Replay(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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
