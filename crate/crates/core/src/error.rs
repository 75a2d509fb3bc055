//! Error type shared by every pipeline stage.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum SrError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Manifest/weight inconsistencies detected at network load.
    #[error("schema error in layer {layer}: {message}")]
    Schema { layer: String, message: String },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Non-finite values or a numeric procedure that failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, SrError>;

impl SrError {
    pub fn invalid<S: Into<String>>(msg: S) -> Self {
        SrError::InvalidArgument(msg.into())
    }

    pub fn io<P: Into<String>, M: Into<String>>(path: P, message: M) -> Self {
        SrError::Io {
            path: path.into(),
            message: message.into(),
        }
    }
}
