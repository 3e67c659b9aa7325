//! Adapter for OpenAI-compatible `chat/completions` endpoints.

use std::collections::BTreeMap;
use std::time::Instant;

use async_trait::async_trait;
use serde::Deserialize;

use super::provider::{Provider, ProviderError, RawResponse};
use super::{GenerationParams, ModelSpec, Prompt};

pub struct HttpProvider {
    provider_id: String,
    client: reqwest::Client,
    /// Name of the environment variable holding the bearer token.
    auth_env: Option<String>,
}

impl HttpProvider {
    pub fn new(provider_id: impl Into<String>, auth_env: Option<String>) -> Self {
        HttpProvider {
            provider_id: provider_id.into(),
            client: reqwest::Client::new(),
            auth_env,
        }
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
    #[serde(default)]
    model: Option<String>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[async_trait]
impl Provider for HttpProvider {
    async fn complete(
        &self,
        model: &ModelSpec,
        prompt: &Prompt,
        params: &GenerationParams,
    ) -> Result<RawResponse, ProviderError> {
        let started = Instant::now();
        let body = serde_json::json!({
            "model": model.model_name,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
            "temperature": params.temperature,
            "max_tokens": params.max_output_tokens,
        });
        let mut request = self.client.post(&model.endpoint).json(&body);
        if let Some(var) = &self.auth_env {
            let token = std::env::var(var)
                .map_err(|_| ProviderError::Transport(format!("credential variable {var} is not set")))?;
            request = request.bearer_auth(token);
        }
        let response = request.send().await.map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                // reqwest errors can carry the URL; keep only the kind
                ProviderError::Transport(format!("request failed ({})", error_kind(&e)))
            }
        })?;
        let status = response.status();
        let bytes = response
            .bytes()
            .await
            .map_err(|e| ProviderError::Transport(format!("reading body failed ({})", error_kind(&e))))?;
        if !status.is_success() {
            return Err(ProviderError::Refusal {
                status: Some(status.as_u16()),
                message: String::from_utf8_lossy(&bytes).chars().take(200).collect(),
            });
        }
        let completion: Completion = serde_json::from_slice(&bytes)
            .map_err(|e| ProviderError::Transport(format!("malformed completion payload: {e}")))?;
        let choice = completion
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ProviderError::Transport("completion has no choices".into()))?;
        if choice.finish_reason.as_deref() == Some("content_filter") {
            return Err(ProviderError::Refusal {
                status: Some(status.as_u16()),
                message: "content filter".into(),
            });
        }
        let text = choice
            .message
            .content
            .ok_or_else(|| ProviderError::Transport("completion message has no content".into()))?;

        let mut metadata = BTreeMap::from([("adapter".to_string(), "openai-compatible".to_string())]);
        if let Some(m) = completion.model {
            metadata.insert("served_model".into(), m);
        }
        if let Some(r) = choice.finish_reason {
            metadata.insert("finish_reason".into(), r);
        }
        Ok(RawResponse {
            text,
            latency_ms: started.elapsed().as_millis() as u64,
            provider_id: self.provider_id.clone(),
            model_name: model.model_name.clone(),
            attempts: 1,
            metadata,
        })
    }
}

fn error_kind(e: &reqwest::Error) -> &'static str {
    if e.is_connect() {
        "connect"
    } else if e.is_decode() {
        "decode"
    } else if e.is_body() {
        "body"
    } else if e.is_request() {
        "request"
    } else {
        "other"
    }
}
