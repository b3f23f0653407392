use thiserror::Error;

use crate::types::Side;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("box has zero area after clamping")]
    DegenerateBox,

    #[error("invalid sample domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate quadrilateral: {0}")]
    DegenerateQuad(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("unrecognized date {raw:?}: {reason}")]
    Date { raw: String, reason: String },

    #[error("no card found{}", .side.map(|s| format!(" on {s} image")).unwrap_or_default())]
    NoCardFound { side: Option<Side> },

    #[error("{port} port failed: {cause}")]
    Port { port: &'static str, cause: String },

    #[error("image decode failed: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }
}
