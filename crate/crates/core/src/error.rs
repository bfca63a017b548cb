use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid segment [{start}, {end}]")]
    InvalidSegment { start: f64, end: f64 },

    #[error("annotation {file_id}: {reason}")]
    Annotation { file_id: String, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("wrong modality: expected {expected}, got {actual}")]
    WrongModality { expected: &'static str, actual: &'static str },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("tensor file {path}: {message}")]
    TensorFormat { path: PathBuf, message: String },

    #[error("video id mismatch: {0}")]
    IdMismatch(String),

    #[error("metric undefined: {0}")]
    NoGroundTruth(&'static str),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
