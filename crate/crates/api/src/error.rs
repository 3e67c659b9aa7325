use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use parlvote_core::aggregation::AggregationError;
use parlvote_core::analysis::AnalysisError;
use parlvote_core::gateway::{ContextError, GatewayError, PredictionError};
use parlvote_core::predict::PredictError;
use serde::Serialize;
use serde_json::{json, Value};

/// Body of every non-2xx response, and of failed entries inside a
/// prediction batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
            details: None,
        }
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::bad_request("invalid_query", r.body_text())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(r.status(), "invalid_body", r.body_text())
    }
}

impl From<AggregationError> for ApiError {
    fn from(e: AggregationError) -> Self {
        match e {
            AggregationError::UnknownRollCall(_) => ApiError::not_found("unknown_roll_call", e.to_string()),
            AggregationError::InvalidQuery(_) => ApiError::bad_request("invalid_query", e.to_string()),
            AggregationError::NegativeAge { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_corpus", e.to_string())
            }
        }
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::InvalidThreshold(_) => ApiError::bad_request("invalid_threshold", e.to_string()),
            AnalysisError::WrongTask { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "wrong_task", e.to_string())
            }
        }
    }
}

impl From<PredictError> for ApiError {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::Context(ContextError::UnknownSpeech(_)) => ApiError::not_found("unknown_speech", e.to_string()),
            PredictError::Context(ContextError::IllegalOverride { attribute, .. }) => {
                ApiError::bad_request("illegal_override", e.to_string()).with_details(json!({ "attribute": attribute }))
            }
            PredictError::Context(ContextError::InvalidConfig(_)) => {
                ApiError::bad_request("invalid_config", e.to_string())
            }
            PredictError::Gateway(g) => match g {
                GatewayError::UnknownModel(_) | GatewayError::UnknownProvider(_) => {
                    ApiError::bad_request("unknown_model", g.to_string())
                }
                GatewayError::InvalidParams(_) => ApiError::bad_request("invalid_params", g.to_string()),
                other => batch_error(&PredictionError::Gateway(other)),
            },
            PredictError::NoGroundTruth(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "no_ground_truth", e.to_string())
            }
            PredictError::Store(_) => {
                tracing::error!(error = %e, "prediction store failure");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_failure", "the prediction could not be stored")
            }
        }
    }
}

/// A failed model inside an otherwise successful batch. Carries the
/// status the request would have had on its own.
pub fn batch_error(e: &PredictionError) -> ApiError {
    let status = match e {
        PredictionError::Gateway(GatewayError::ProviderTimeout { .. }) => StatusCode::GATEWAY_TIMEOUT,
        _ => StatusCode::BAD_GATEWAY,
    };
    let attempts = match e {
        PredictionError::Gateway(
            GatewayError::ProviderTimeout { attempts }
            | GatewayError::ProviderRefusal { attempts, .. }
            | GatewayError::TransportFailure { attempts, .. },
        ) => Some(*attempts),
        _ => None,
    };
    let mut details = json!({ "status": status.as_u16() });
    if let Some(a) = attempts {
        details["attempts"] = json!(a);
    }
    ApiError::new(status, e.code(), e.to_string()).with_details(details)
}
