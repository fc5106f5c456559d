use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use nephro_core::DiaryError;
use serde_json::json;

/// Error returned by every route as `{"error": {"code", "message"}}`.
/// `code` is a stable key clients can translate; `message` is English.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", "authentication required")
    }

    pub fn bad_credentials() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "invalid_credentials", "invalid credentials")
    }

    pub fn forbidden(message: impl Into<String>) -> Self {
        Self::new(StatusCode::FORBIDDEN, "forbidden", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_failed", message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn internal() -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error")
    }
}

impl From<DiaryError> for ApiError {
    fn from(e: DiaryError) -> Self {
        match &e {
            DiaryError::UnknownPatient(_) | DiaryError::UnknownDoctor(_) | DiaryError::UnknownRecord(_) => {
                ApiError::not_found(e.to_string())
            }
            DiaryError::NotLinked => ApiError::new(StatusCode::FORBIDDEN, "not_linked", e.to_string()),
            DiaryError::Forbidden(_) => ApiError::forbidden(e.to_string()),
            DiaryError::FutureDate { .. } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "future_date", e.to_string()),
            DiaryError::Validation(_) | DiaryError::Rule(_) => ApiError::validation(e.to_string()),
            DiaryError::ImageTooLarge { .. } => ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "too_large", e.to_string()),
            DiaryError::Storage(_) => {
                tracing::error!(error = %e, "storage failure");
                ApiError::internal()
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
