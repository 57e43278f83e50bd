use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by tensor, model, gradient and I/O operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for mode {mode} of size {size}")]
    Index {
        mode: usize,
        index: usize,
        size: usize,
    },

    #[error("linear index {index} out of range for {len} elements")]
    LinearIndex { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unsupported tensor order {0}; at least two modes are required")]
    UnsupportedOrder(usize),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn parse(offset: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: msg.into(),
        }
    }
}
