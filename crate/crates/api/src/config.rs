use std::path::{Path, PathBuf};

use serde::Deserialize;

pub const DEFAULT_DEADLINE_SECS: u64 = 60;

/// Server configuration file. Relative paths are taken from the directory
/// holding the file.
///
/// ```toml
/// bind = "127.0.0.1:8080"
/// corpus = "../fixtures/corpus"
/// store = "predictions.jsonl"
/// registry = "../fixtures/registry.toml"
/// ui_origin = "http://localhost:5173"
/// deadline_secs = 60
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    pub corpus: PathBuf,
    pub store: PathBuf,
    /// Provider registry; the built-in demo stubs when absent.
    #[serde(default)]
    pub registry: Option<PathBuf>,
    #[serde(default)]
    pub ui_origin: Option<String>,
    #[serde(default = "default_deadline")]
    pub deadline_secs: u64,
    #[serde(default)]
    pub stereotype_lexicon: Option<PathBuf>,
    #[serde(default)]
    pub topic_lexicon: Option<PathBuf>,
    #[serde(default)]
    pub failure_rules: Option<PathBuf>,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

fn default_deadline() -> u64 {
    DEFAULT_DEADLINE_SECS
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {reason}")]
    Invalid { path: String, reason: String },
}

impl ApiConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut config: ApiConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid {
            path: base.display().to_string(),
            reason: e.to_string(),
        })?;
        if config.deadline_secs == 0 {
            return Err(ConfigError::Invalid {
                path: base.display().to_string(),
                reason: "deadline_secs must be positive".into(),
            });
        }
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut config.corpus);
        rebase(&mut config.store);
        for p in [
            &mut config.registry,
            &mut config.stereotype_lexicon,
            &mut config.topic_lexicon,
            &mut config.failure_rules,
        ]
        .into_iter()
        .flatten()
        {
            rebase(p);
        }
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }
}
