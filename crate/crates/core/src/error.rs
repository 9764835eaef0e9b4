use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),
    /// Tensor or matrix dimensions do not agree.
    #[error("shape error: {0}")]
    Shape(String),
    /// A module configuration violates its invariants.
    #[error("config error: {0}")]
    Config(String),
    /// A text record could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    /// A binary file does not follow its format.
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
