use std::collections::BTreeMap;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{GenerationParams, ModelSpec, Prompt};

/// Verbatim model output plus transport metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    pub text: String,
    pub latency_ms: u64,
    pub provider_id: String,
    pub model_name: String,
    /// Number of dispatch attempts it took, including the successful one.
    pub attempts: u32,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// Failure of a single dispatch attempt.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider timed out")]
    Timeout,
    #[error("provider refused the request (status {status:?}): {message}")]
    Refusal { status: Option<u16>, message: String },
    #[error("transport failure: {0}")]
    Transport(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        !matches!(self, ProviderError::Refusal { .. })
    }
}

/// One backend able to answer prompts for the models registered under its
/// provider id. Adapters own their wire protocol.
#[async_trait]
pub trait Provider: Send + Sync {
    async fn complete(
        &self,
        model: &ModelSpec,
        prompt: &Prompt,
        params: &GenerationParams,
    ) -> Result<RawResponse, ProviderError>;
}
