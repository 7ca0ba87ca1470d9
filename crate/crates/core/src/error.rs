use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a shape or ordering contract.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// NaN or infinity showed up in a loss, gradient, or parameter.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Evaluation outside the valid domain, e.g. a projective horizon.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("input not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("unsupported image: {0}")]
    Image(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("unsupported model version {found} (expected {expected})")]
    Version { found: u8, expected: u8 },

    #[error("model file truncated: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
