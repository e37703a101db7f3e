use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;
use webvoice_core::ErrorBody;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdaptorError {
    #[error("invalid or expired token")]
    Unauthorized,
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl AdaptorError {
    pub fn status(&self) -> StatusCode {
        match self {
            AdaptorError::Unauthorized => StatusCode::UNAUTHORIZED,
            AdaptorError::Forbidden(_) => StatusCode::FORBIDDEN,
            AdaptorError::NotFound(_) => StatusCode::NOT_FOUND,
            AdaptorError::BadRequest(_) => StatusCode::BAD_REQUEST,
            AdaptorError::Conflict(_) => StatusCode::CONFLICT,
            AdaptorError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for AdaptorError {
    fn into_response(self) -> Response {
        let status = self.status();
        (status, Json(ErrorBody::new(status.as_u16(), self.to_string()))).into_response()
    }
}
