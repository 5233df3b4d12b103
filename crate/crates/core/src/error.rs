//! Error type shared by every stage of the pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or geometry.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed text input (netpbm, graph files, CSV). `offset` is a byte offset
    /// into the payload, or a line number where noted in the message.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }

    /// Wraps `self` with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
