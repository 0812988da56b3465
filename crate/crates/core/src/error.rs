//! Shared error type for the whole library.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A size bound was exceeded (qubit count, sample budget, ...).
    #[error("capacity: {0}")]
    Capacity(String),

    /// A qubit, class, or element index was out of range.
    #[error("index out of range: {0}")]
    Index(String),

    /// Tensor/state dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A file did not match its expected binary format.
    #[error("format: {0}")]
    Format(String),

    /// A file ended before the declared payload.
    #[error("truncated input: {0}")]
    Length(String),

    /// Two inputs that must agree do not (e.g. image/label counts).
    #[error("consistency: {0}")]
    Consistency(String),

    /// A configuration value is invalid.
    #[error("config: {0}")]
    Config(String),

    /// A numeric invariant failed (NaN/Inf at a layer boundary, lost norm).
    #[error("numeric: {0}")]
    Numeric(String),

    /// An operation that needs data received none.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
