use thiserror::Error;

/// Errors raised by the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed trace, label, or feature file.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// An argument outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or unknown configuration key/value.
    #[error("config error for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(message: impl Into<String>) -> Result<T> {
    Err(Error::Domain(message.into()))
}

pub(crate) fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}
