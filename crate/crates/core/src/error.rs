use thiserror::Error;

/// Crate-wide error type. Variants mirror the failure classes of the public
/// API: data parsing, structural validation, shape mismatches, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A file did not parse under its declared format.
    #[error("format error in {path}: {detail}")]
    Format { path: String, detail: String },

    /// An input violated a structural precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Matrix or layer dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// A node or row index is out of range.
    #[error("index {index} out of range for {what} of size {size}")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },

    /// A softmax row had every entry masked out.
    #[error("degenerate softmax row {row}: all entries masked")]
    DegenerateRow { row: usize },

    /// An experiment or model configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
