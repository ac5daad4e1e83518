use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid landmark frame: {0}")]
    InvalidFrame(String),
    #[error("degenerate hand: {0}")]
    DegenerateHand(String),
    #[error("window holds {got} frames, expected {expected}")]
    WrongWindowLength { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("gesture class {0} is absent from the training split")]
    MissingClass(String),
    #[error("too few points: {0}")]
    TooFewPoints(String),
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("value out of range: {0}")]
    Range(String),
    #[error("need at least {needed} tracks, got {got}")]
    TooFewTracks { needed: usize, got: usize },
    #[error("track {0} missing from embedding")]
    MissingTrack(String),
    #[error("track {0} appears more than once in embedding")]
    DuplicateTrack(String),
    #[error("music space has no emotion centers")]
    NoCenters,
    #[error("music space has no tracks")]
    EmptySpace,
    #[error("need at least {needed}, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
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
        Error::Io { path: path.into(), source }
    }
}
