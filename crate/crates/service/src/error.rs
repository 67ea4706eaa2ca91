use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

pub type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown session `{0}`")]
    NotFound(String),

    /// An upstream artifact the request depends on is missing.
    #[error("{0}")]
    Conflict(String),

    #[error("revision {given} is stale; the session is at revision {current}")]
    Stale { given: u64, current: u64 },

    #[error("{0}")]
    BadRequest(String),

    #[error(transparent)]
    Core(#[from] cegforge_core::Error),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        use cegforge_core::Error as E;
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Stale { .. } => StatusCode::PRECONDITION_FAILED,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Core(E::Incomplete(_)) => StatusCode::CONFLICT,
            ApiError::Core(E::Io(_)) => StatusCode::INTERNAL_SERVER_ERROR,
            ApiError::Core(_) => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::NotFound(_) => "not_found",
            ApiError::Conflict(_) => "conflict",
            ApiError::Stale { .. } => "stale_revision",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Core(e) => e.kind(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "kind": self.kind(), "message": self.to_string() } });
        (self.status(), Json(body)).into_response()
    }
}

pub(crate) fn missing(what: &str, step: &str) -> ApiError {
    ApiError::Conflict(format!("no {what} yet; {step} first"))
}
