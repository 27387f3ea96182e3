use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Header or column mapping problem; no partial output is produced.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid parameter `{name}`: {message}")]
    Parameter { name: &'static str, message: String },

    /// Request or label validation failure tied to a named field.
    #[error("validation error on `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("no customers in window")]
    NoCustomers,

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("explanation undefined: {0}")]
    ExplanationUndefined(String),

    #[error("comparison undefined: {0}")]
    ComparisonUndefined(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("source data hash mismatch: expected {expected}, found {found}")]
    SourceMismatch { expected: String, found: String },

    /// Storage write failed; the operation can be retried.
    #[error("write failed (retryable): {0}")]
    Write(#[source] std::io::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Write(_))
    }
}
