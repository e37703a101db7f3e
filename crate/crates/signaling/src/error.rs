use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;
use webvoice_core::ErrorBody;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignalError {
    #[error("authentication required")]
    Unauthorized,
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("storage failure: {0}")]
    Storage(String),
}

impl SignalError {
    pub fn status(&self) -> StatusCode {
        match self {
            SignalError::Unauthorized => StatusCode::UNAUTHORIZED,
            SignalError::Forbidden(_) => StatusCode::FORBIDDEN,
            SignalError::NotFound(_) => StatusCode::NOT_FOUND,
            SignalError::BadRequest(_) => StatusCode::BAD_REQUEST,
            SignalError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for SignalError {
    fn into_response(self) -> Response {
        let status = self.status();
        (status, Json(ErrorBody::new(status.as_u16(), self.to_string()))).into_response()
    }
}
