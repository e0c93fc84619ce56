use std::io;

use thiserror::Error;

/// Errors raised by graph construction, training and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: label refers to unknown entity `{entity}`")]
    UnknownEntity { line: usize, entity: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("no negative found after {attempts} attempts (graph is too dense)")]
    Saturated { attempts: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch} (learning rate {learning_rate:e})")]
    NonFinite {
        epoch: usize,
        batch: usize,
        learning_rate: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
