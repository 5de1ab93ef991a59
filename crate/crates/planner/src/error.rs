use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::json;

use crate::session::Phase;

/// Error returned to HTTP clients as `{"error": code, "message": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl ApiError {
    fn new(status: u16, error: &'static str, message: String) -> Self {
        ApiError {
            status,
            error,
            message,
            phase: None,
            hint: None,
            residual: None,
        }
    }

    pub fn protocol(message: String, phase: Phase) -> Self {
        ApiError {
            phase: Some(phase),
            ..Self::new(409, "protocol", message)
        }
    }

    pub fn busy(message: &str) -> Self {
        Self::new(409, "busy", message.to_string())
    }

    pub fn invalid(message: String) -> Self {
        Self::new(422, "invalid_request", message)
    }

    pub fn not_found(what: &str) -> Self {
        Self::new(404, "not_found", format!("{what} not found"))
    }

    pub fn incomplete(residual: f64, target: f64) -> Self {
        ApiError {
            residual: Some(residual),
            hint: Some("raise max_path_nodes or n_iterations".into()),
            ..Self::new(
                422,
                "incomplete_plan",
                format!("best plan leaves {residual:.4} unswept, above the {target} target"),
            )
        }
    }

    pub fn internal(message: String) -> Self {
        Self::new(500, "internal", message)
    }
}

impl From<mts_core::Error> for ApiError {
    fn from(e: mts_core::Error) -> Self {
        use mts_core::Error as E;
        match &e {
            E::EmptySubPrior { .. } => ApiError {
                hint: Some("widen or add preferred areas so every agent covers some probability mass".into()),
                ..Self::new(422, "empty_sub_prior", e.to_string())
            },
            E::InvalidScenario(_) => Self::new(422, "invalid_scenario", e.to_string()),
            E::Io { .. } => Self::new(422, "io", e.to_string()),
            E::DeadEnd { .. } => Self::new(500, "optimizer", e.to_string()),
            _ => Self::new(422, "invalid_request", e.to_string()),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.error, self.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = serde_json::to_value(&self).unwrap_or_else(|_| json!({"error": self.error}));
        (status, Json(body)).into_response()
    }
}
