use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use seglab_core::pipeline::FieldError;
use seglab_core::Error;

/// JSON error document: `{"error": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
    pub retryable: bool,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                fields: Vec::new(),
                retryable: false,
            },
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    /// 422 carrying one entry per offending field.
    pub fn invalid(fields: Vec<FieldError>) -> Self {
        let message = fields
            .iter()
            .map(|f| if f.field.is_empty() { f.message.clone() } else { format!("{}: {}", f.field, f.message) })
            .collect::<Vec<_>>()
            .join("; ");
        let mut e = Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", message);
        e.body.fields = fields;
        e
    }

    pub fn field(field: &str, message: impl Into<String>) -> Self {
        Self::invalid(vec![FieldError {
            field: field.into(),
            message: message.into(),
        }])
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::NotFound(_) => Self::not_found(message),
            Error::Validation { .. } | Error::Parameter { .. } => Self::invalid(vec![FieldError::from(e)]),
            Error::Schema(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "schema", message),
            Error::NoCustomers => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "no_customers", message),
            Error::MetricUndefined(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "metric_undefined", message),
            Error::ExplanationUndefined(_) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "explanation_undefined", message)
            }
            Error::ComparisonUndefined(_) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "comparison_undefined", message)
            }
            Error::SourceMismatch { .. } => Self::new(StatusCode::CONFLICT, "source_mismatch", message),
            Error::Write(_) => {
                let mut e = Self::new(StatusCode::SERVICE_UNAVAILABLE, "write_failed", message);
                e.body.retryable = true;
                e
            }
            Error::Io(_) | Error::Json(_) => Self::internal(message),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    error: &'a ErrorBody,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(Envelope { error: &self.body })).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
