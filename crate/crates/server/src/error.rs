use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

/// Error body: `{code, message, detail?}`.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.to_owned(),
            message: message.into(),
            detail: None,
        }
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "UnknownScenario",
            format!("no scenario with id `{id}`"),
        )
    }

    pub fn version_conflict(expected: u64, current: u64) -> Self {
        Self {
            detail: Some(serde_json::json!({ "expected": expected, "current": current })),
            ..Self::new(
                StatusCode::CONFLICT,
                "VersionConflict",
                format!("expected version {expected}, scenario is at version {current}"),
            )
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "InternalError", message)
    }
}

impl From<rgt_core::Error> for ApiError {
    fn from(err: rgt_core::Error) -> Self {
        use rgt_core::Error as E;
        let status = match err {
            E::NotDecomposable(_) | E::ChoiceOutsideInterval { .. } | E::StageOrderViolation(_) => {
                StatusCode::CONFLICT
            }
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, err.code(), err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}
