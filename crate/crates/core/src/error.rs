use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The data term has no pixel to average over.
    #[error("data term has zero weight: {0}")]
    ZeroWeight(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("unsupported image format (leading bytes {magic:02x?})")]
    Format { magic: Vec<u8> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
