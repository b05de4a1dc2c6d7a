//! JSON error payload `{code, message, detail}` shared by the CLI and service.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use goodwill::Error;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: Value,
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
                detail: Value::Null,
            },
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "input", message)
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.body.detail = detail;
        self
    }
}

fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::Io(_) | Error::Numerical { .. } | Error::ChainAborted { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

fn detail_for(e: &Error) -> Value {
    match e {
        Error::Validation { row, column, .. } => serde_json::json!({ "row": row, "column": column }),
        Error::Infeasible { binding, detail } => serde_json::json!({ "binding": binding, "reason": detail }),
        Error::Bounds { index, .. } => serde_json::json!({ "index": index }),
        Error::Numerical { step, .. } => serde_json::json!({ "step": step }),
        Error::ChainAborted { chain, iteration, .. } => serde_json::json!({ "chain": chain, "iteration": iteration }),
        _ => Value::Null,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self {
            status: status_for(&e),
            body: ErrorBody {
                code: e.code().into(),
                message: e.to_string(),
                detail: detail_for(&e),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_errors_map_to_status_and_detail() {
        let e = ApiError::from(Error::NotFound("x".into()));
        assert_eq!((e.status, e.body.code.as_str()), (StatusCode::NOT_FOUND, "not_found"));
        let e = ApiError::from(Error::Infeasible {
            binding: "variance_cap".into(),
            detail: "below minimum".into(),
        });
        assert_eq!(e.status, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(e.body.detail["binding"], "variance_cap");
        assert_eq!(ApiError::from(Error::Spec("s".into())).body.detail, Value::Null);
    }
}
