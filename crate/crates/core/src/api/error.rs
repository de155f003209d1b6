use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::Value;

use crate::app::EngineError;
use crate::gateway::GatewayError;
use crate::store::StoreError;

/// Error body: `{"code": ..., "message": ...}` plus optional fields.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    /// Pipeline stage that turned an import down.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.into(), message: message.into(), stage: None, details: None }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn unknown_card(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_card", format!("unknown card {id}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::ProviderUnavailable(_) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "provider_unavailable", e.to_string()),
            GatewayError::BudgetExceeded { .. } => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "budget_exceeded", e.to_string()),
            GatewayError::InvalidRequest(_) | GatewayError::DegenerateDataset(_) => ApiError::bad_request(e.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownCard(id) => ApiError::unknown_card(&id),
            StoreError::UnknownImport(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_import", e.to_string()),
            StoreError::InvalidTransition { .. } => ApiError::new(StatusCode::CONFLICT, "invalid_transition", e.to_string()),
            StoreError::LimitExceeded { .. } => ApiError::new(StatusCode::BAD_REQUEST, "limit_exceeded", e.to_string()),
            StoreError::InvalidRequest(_) => ApiError::bad_request(e.to_string()),
            StoreError::Embedding(g) => g.into(),
            StoreError::MissingArticle(_) | StoreError::InvalidCard(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_card", e.to_string()),
            StoreError::Sqlite(_) | StoreError::Io(_) | StoreError::Corrupt(_) | StoreError::Vector(_) => {
                tracing::error!("store failure: {e}");
                ApiError::internal(e.to_string())
            }
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::MalformedUrl(_) => ApiError::new(StatusCode::BAD_REQUEST, "malformed_url", e.to_string()),
            EngineError::PipelineRejected(item) => {
                let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "pipeline_rejected", EngineError::PipelineRejected(item.clone()).to_string());
                err.stage = item.rejection.as_ref().map(|r| r.stage.clone());
                err.details = serde_json::to_value(&*item).ok().map(|v| serde_json::json!({ "import": v }));
                err
            }
            EngineError::Provider(g) => g.into(),
            EngineError::Store(s) => s.into(),
            EngineError::Ingest(_) => ApiError::new(StatusCode::BAD_GATEWAY, "fetch_failed", e.to_string()),
            EngineError::JobRunning(_) => ApiError::new(StatusCode::CONFLICT, "job_running", e.to_string()),
            EngineError::UnknownJob(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_job", e.to_string()),
            EngineError::InvalidRequest(_) => ApiError::bad_request(e.to_string()),
            EngineError::Setup(_) => ApiError::internal(e.to_string()),
        }
    }
}
