use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called outside its contract (dimension mismatch,
    /// invalid index, precondition violation).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Bad user-facing configuration (unknown key, out-of-range value,
    /// missing file).
    #[error("configuration error: {0}")]
    Config(String),

    /// A dataset file did not match the expected encoding.
    #[error("format error in {field}: {message}")]
    Format { field: String, message: String },

    /// Training diverged (NaN loss or non-finite gradient).
    #[error("numerical abort: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
