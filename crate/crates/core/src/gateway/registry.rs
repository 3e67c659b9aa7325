use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stub::{StubReply, StubScript};
use super::STUB_ENDPOINT;

/// Provider registry file: provider id → endpoint, credential variable,
/// limits and model names.
///
/// ```toml
/// [providers.openai]
/// endpoint = "https://api.openai.com/v1/chat/completions"
/// auth_env = "OPENAI_API_KEY"
/// [providers.openai.models.gpt-4o]
///
/// [providers.stub]
/// endpoint = "stub"
/// [providers.stub.models.alpha]
/// default = { kind = "seeded", seed = 1 }
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegistryConfig {
    #[serde(default)]
    pub providers: BTreeMap<String, ProviderConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// Chat-completions URL, or `stub` for the scripted in-tree provider.
    pub endpoint: String,
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default)]
    pub models: BTreeMap<String, ModelConfig>,
}

/// Per-model settings. Script fields only matter for stub providers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub script: StubScript,
}

fn default_in_flight() -> usize {
    4
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    250
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("cannot read registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid registry: {0}")]
    Invalid(String),
}

impl ProviderConfig {
    pub fn stub() -> Self {
        ProviderConfig {
            endpoint: STUB_ENDPOINT.to_string(),
            auth_env: None,
            max_in_flight: default_in_flight(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            models: BTreeMap::new(),
        }
    }

    pub fn with_model(mut self, name: impl Into<String>, script: StubScript) -> Self {
        self.models.insert(name.into(), ModelConfig { script });
        self
    }
}

impl RegistryConfig {
    pub fn from_toml(text: &str) -> Result<Self, RegistryError> {
        let config: RegistryConfig = toml::from_str(text).map_err(|e| RegistryError::Invalid(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// A registry with one stub provider `stub` serving two seeded models,
    /// `alpha` and `beta`.
    pub fn demo() -> Self {
        RegistryConfig {
            providers: BTreeMap::from([(
                "stub".to_string(),
                ProviderConfig::stub()
                    .with_model("alpha", StubScript::always(StubReply::Seeded { seed: 1 }))
                    .with_model("beta", StubScript::always(StubReply::Seeded { seed: 2 })),
            )]),
        }
    }

    pub fn check(&self) -> Result<(), RegistryError> {
        for (id, p) in &self.providers {
            if id.is_empty() || id.contains('/') {
                return Err(RegistryError::Invalid(format!("provider id `{id}` must be non-empty without `/`")));
            }
            if p.max_in_flight == 0 {
                return Err(RegistryError::Invalid(format!("provider {id}: max_in_flight must be positive")));
            }
            if p.timeout_ms == 0 {
                return Err(RegistryError::Invalid(format!("provider {id}: timeout_ms must be positive")));
            }
            if p.endpoint != STUB_ENDPOINT && !(p.endpoint.starts_with("http://") || p.endpoint.starts_with("https://")) {
                return Err(RegistryError::Invalid(format!(
                    "provider {id}: endpoint must be an http(s) URL or `stub`"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixed_registry() {
        let config = RegistryConfig::from_toml(
            r#"
            [providers.openai]
            endpoint = "https://api.openai.com/v1/chat/completions"
            auth_env = "OPENAI_API_KEY"
            max_in_flight = 2
            [providers.openai.models.gpt-4o]

            [providers.stub]
            endpoint = "stub"
            timeout_ms = 50
            [providers.stub.models.alpha]
            default = { kind = "seeded", seed = 1 }
            "#,
        )
        .unwrap();
        let openai = &config.providers["openai"];
        assert_eq!(openai.max_in_flight, 2);
        assert_eq!(openai.max_retries, 2);
        assert!(openai.models.contains_key("gpt-4o"));
        assert_eq!(config.providers["stub"].timeout_ms, 50);
        assert_eq!(
            config.providers["stub"].models["alpha"].script.fallback,
            StubReply::Seeded { seed: 1 }
        );
    }

    #[test]
    fn rejects_bad_endpoint() {
        let err = RegistryConfig::from_toml("[providers.x]\nendpoint = \"ftp://nope\"\n").unwrap_err();
        assert!(err.to_string().contains("endpoint"));
    }
}
