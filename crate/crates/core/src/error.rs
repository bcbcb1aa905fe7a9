use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The file ended before the declared payload was read.
    #[error("truncated {what}: needed {needed} bytes at offset {offset}, file has {len}")]
    Truncated {
        what: &'static str,
        offset: usize,
        needed: usize,
        len: usize,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("trailing data: {0} unexpected bytes after payload")]
    TrailingBytes(usize),

    #[error("indptr inconsistent at row {row}: {detail}")]
    IndptrInconsistent { row: usize, detail: String },

    #[error("index {index} out of range (d = {dim}) at row {row}, offset {offset}")]
    IndexOutOfRange {
        row: usize,
        offset: usize,
        index: u64,
        dim: u64,
    },

    #[error("indices not strictly increasing at row {row}, offset {offset}")]
    UnsortedIndices { row: usize, offset: usize },

    #[error("stored zero value at row {row}, offset {offset}")]
    ZeroValue { row: usize, offset: usize },

    #[error("non-finite value at row {row}, offset {offset}")]
    NonFiniteValue { row: usize, offset: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error("index file inconsistent: {0}")]
    CorruptIndex(String),

    #[error("metadata: {0}")]
    Metadata(String),

    #[error("model fit failed: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }

    /// True for errors caused by bad inputs (data or parameters) rather than
    /// the environment or a damaged file.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::IndptrInconsistent { .. }
                | Error::IndexOutOfRange { .. }
                | Error::UnsortedIndices { .. }
                | Error::ZeroValue { .. }
                | Error::NonFiniteValue { .. }
                | Error::InvalidParam(_)
                | Error::InvalidVector(_)
                | Error::Fit(_)
        )
    }

    /// True for errors that come from reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Truncated { .. }
                | Error::MalformedHeader(_)
                | Error::TrailingBytes(_)
                | Error::CorruptIndex(_)
                | Error::Metadata(_)
        )
    }
}
