use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use futures::future::join_all;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use super::http::HttpProvider;
use super::parse::{parse_prediction, ParseError, ParsedPrediction};
use super::provider::{Provider, ProviderError, RawResponse};
use super::registry::{RegistryConfig, RegistryError};
use super::stub::StubProvider;
use super::{GenerationParams, ModelId, ModelSpec, Prompt, STUB_ENDPOINT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 2,
            base_backoff: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): base, 2·base, 4·base, ...
    pub fn backoff(&self, retry: u32) -> Duration {
        self.base_backoff.saturating_mul(1u32 << retry.saturating_sub(1).min(16))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("provider `{0}` is not registered")]
    UnknownProvider(String),
    #[error("model `{0}` is not registered")]
    UnknownModel(ModelId),
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("provider timed out after {attempts} attempt(s)")]
    ProviderTimeout { attempts: u32 },
    #[error("provider refused the request (status {status:?}): {message}")]
    ProviderRefusal {
        status: Option<u16>,
        message: String,
        attempts: u32,
    },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    TransportFailure { message: String, attempts: u32 },
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::UnknownProvider(_) => "unknown_provider",
            GatewayError::UnknownModel(_) => "unknown_model",
            GatewayError::InvalidParams(_) => "invalid_params",
            GatewayError::ProviderTimeout { .. } => "provider_timeout",
            GatewayError::ProviderRefusal { .. } => "provider_refusal",
            GatewayError::TransportFailure { .. } => "transport_failure",
        }
    }

    fn from_attempt(err: ProviderError, attempts: u32) -> Self {
        match err {
            ProviderError::Timeout => GatewayError::ProviderTimeout { attempts },
            ProviderError::Refusal { status, message } => GatewayError::ProviderRefusal {
                status,
                message,
                attempts,
            },
            ProviderError::Transport(message) => GatewayError::TransportFailure { message, attempts },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PredictionError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl PredictionError {
    pub fn code(&self) -> &'static str {
        match self {
            PredictionError::Gateway(e) => e.code(),
            PredictionError::Parse(ParseError::UnparseableOutput(_)) => "unparseable_output",
            PredictionError::Parse(ParseError::OutOfRangeConfidence(_)) => "out_of_range_confidence",
            PredictionError::Parse(ParseError::WrongLabelSet { .. }) => "wrong_label_set",
        }
    }
}

/// One model's result within a comparison batch.
#[derive(Debug, Clone)]
pub struct ModelOutcome {
    pub model: ModelId,
    /// Present whenever the provider answered, even if parsing failed.
    pub raw: Option<RawResponse>,
    pub result: Result<ParsedPrediction, PredictionError>,
}

struct ProviderSlot {
    endpoint: String,
    provider: Arc<dyn Provider>,
    permits: Arc<Semaphore>,
    attempt_timeout: Duration,
    retry: RetryPolicy,
    models: BTreeSet<String>,
}

/// Limits applied to one registered provider.
#[derive(Debug, Clone, Copy)]
pub struct ProviderLimits {
    pub max_in_flight: usize,
    pub attempt_timeout: Duration,
    pub retry: RetryPolicy,
}

impl Default for ProviderLimits {
    fn default() -> Self {
        ProviderLimits {
            max_in_flight: 4,
            attempt_timeout: Duration::from_secs(30),
            retry: RetryPolicy::default(),
        }
    }
}

/// Registered providers with their in-flight caps, timeouts and retry
/// budgets.
#[derive(Default)]
pub struct Gateway {
    providers: BTreeMap<String, ProviderSlot>,
    stubs: BTreeMap<String, Arc<StubProvider>>,
}

impl Gateway {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_config(config: &RegistryConfig) -> Result<Self, RegistryError> {
        config.check()?;
        let mut gateway = Gateway::new();
        for (id, p) in &config.providers {
            let limits = ProviderLimits {
                max_in_flight: p.max_in_flight,
                attempt_timeout: Duration::from_millis(p.timeout_ms),
                retry: RetryPolicy {
                    max_retries: p.max_retries,
                    base_backoff: Duration::from_millis(p.backoff_ms),
                },
            };
            let models: Vec<String> = p.models.keys().cloned().collect();
            if p.endpoint == STUB_ENDPOINT {
                let stub = p
                    .models
                    .iter()
                    .fold(StubProvider::new(id), |s, (name, m)| s.with_model(name, m.script.clone()));
                gateway.register_stub(id, Arc::new(stub), models, limits);
            } else {
                let http = HttpProvider::new(id, p.auth_env.clone());
                gateway.register(id, &p.endpoint, Arc::new(http), models, limits);
            }
        }
        Ok(gateway)
    }

    pub fn register(
        &mut self,
        provider_id: &str,
        endpoint: &str,
        provider: Arc<dyn Provider>,
        models: impl IntoIterator<Item = String>,
        limits: ProviderLimits,
    ) {
        self.providers.insert(
            provider_id.to_string(),
            ProviderSlot {
                endpoint: endpoint.to_string(),
                provider,
                permits: Arc::new(Semaphore::new(limits.max_in_flight.max(1))),
                attempt_timeout: limits.attempt_timeout,
                retry: limits.retry,
                models: models.into_iter().collect(),
            },
        );
    }

    pub fn register_stub(
        &mut self,
        provider_id: &str,
        stub: Arc<StubProvider>,
        models: impl IntoIterator<Item = String>,
        limits: ProviderLimits,
    ) {
        self.register(provider_id, STUB_ENDPOINT, stub.clone(), models, limits);
        self.stubs.insert(provider_id.to_string(), stub);
    }

    /// The stub registered under `provider_id`, for inspecting its call log.
    pub fn stub(&self, provider_id: &str) -> Option<Arc<StubProvider>> {
        self.stubs.get(provider_id).cloned()
    }

    pub fn model_ids(&self) -> Vec<ModelId> {
        self.providers
            .iter()
            .flat_map(|(p, slot)| slot.models.iter().map(move |m| ModelId::new(p, m)))
            .collect()
    }

    pub fn model(&self, id: &ModelId) -> Result<ModelSpec, GatewayError> {
        let slot = self
            .providers
            .get(&id.provider_id)
            .ok_or_else(|| GatewayError::UnknownProvider(id.provider_id.clone()))?;
        if !slot.models.contains(&id.model_name) {
            return Err(GatewayError::UnknownModel(id.clone()));
        }
        Ok(ModelSpec {
            provider_id: id.provider_id.clone(),
            model_name: id.model_name.clone(),
            endpoint: slot.endpoint.clone(),
        })
    }

    /// Dispatches one prompt, retrying timeouts and transport failures up
    /// to the provider's retry budget with exponential backoff. Refusals
    /// are final.
    pub async fn predict(
        &self,
        model: &ModelSpec,
        prompt: &Prompt,
        params: &GenerationParams,
    ) -> Result<RawResponse, GatewayError> {
        params.validate().map_err(GatewayError::InvalidParams)?;
        let slot = self
            .providers
            .get(&model.provider_id)
            .ok_or_else(|| GatewayError::UnknownProvider(model.provider_id.clone()))?;
        if !slot.models.contains(&model.model_name) {
            return Err(GatewayError::UnknownModel(model.id()));
        }

        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let outcome = {
                let _permit = slot.permits.acquire().await.expect("provider semaphore closed");
                match tokio::time::timeout(slot.attempt_timeout, slot.provider.complete(model, prompt, params)).await {
                    Ok(result) => result,
                    Err(_) => Err(ProviderError::Timeout),
                }
            };
            match outcome {
                Ok(mut raw) => {
                    raw.attempts = attempt;
                    return Ok(raw);
                }
                Err(err) if err.is_retryable() && attempt <= slot.retry.max_retries => {
                    tracing::debug!(model = %model.id(), attempt, error = %err, "retrying provider call");
                    tokio::time::sleep(slot.retry.backoff(attempt)).await;
                }
                Err(err) => {
                    tracing::warn!(model = %model.id(), attempt, error = %err, "provider call failed");
                    return Err(GatewayError::from_attempt(err, attempt));
                }
            }
        }
    }

    /// Sends the same prompt and parameters to every model concurrently.
    /// Failures are reported per model and never abort the batch; results
    /// come back in the order of `models`.
    pub async fn compare_models(
        &self,
        models: &[ModelSpec],
        prompt: &Prompt,
        params: &GenerationParams,
    ) -> Vec<ModelOutcome> {
        join_all(models.iter().map(|model| async move {
            match self.predict(model, prompt, params).await {
                Ok(raw) => {
                    let result = parse_prediction(&raw, prompt.task).map_err(PredictionError::from);
                    ModelOutcome {
                        model: model.id(),
                        raw: Some(raw),
                        result,
                    }
                }
                Err(e) => ModelOutcome {
                    model: model.id(),
                    raw: None,
                    result: Err(e.into()),
                },
            }
        }))
        .await
    }
}
