//! Prompt construction, provider dispatch and answer parsing for the two
//! prediction tasks (vote and gender).
//!
//! The flow for one speaker is
//! [`resolve_context`] → [`build_prompt`] → [`Gateway::predict`] →
//! [`parse_prediction`]; [`Gateway::compare_models`] runs the last two steps
//! for several models against one byte-identical prompt.

mod context;
mod dispatch;
mod http;
mod parse;
mod prompt;
mod provider;
mod registry;
mod stub;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Gender, VoteChoice};

pub use context::{resolve_context, Attribute, ContextConfig, ContextError, ResolvedContext};
pub use dispatch::{Gateway, GatewayError, ModelOutcome, PredictionError, ProviderLimits, RetryPolicy};
pub use http::HttpProvider;
pub use parse::{format_answer, parse_answer, parse_prediction, ParseError, ParsedPrediction};
pub use prompt::{attribute_sentence, attribute_sentence_prefix, build_prompt, ContextFingerprint, Prompt, TEMPLATE_VERSION};
pub use provider::{Provider, ProviderError, RawResponse};
pub use registry::{ModelConfig, ProviderConfig, RegistryConfig, RegistryError};
pub use stub::{StubCall, StubProvider, StubReply, StubRule, StubScript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[serde(rename = "vote")]
    VotePrediction,
    #[serde(rename = "gender")]
    GenderPrediction,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::VotePrediction => "vote",
            TaskKind::GenderPrediction => "gender",
        }
    }

    pub fn labels(self) -> &'static [Label] {
        match self {
            TaskKind::VotePrediction => &[Label::For, Label::Against, Label::Abstain],
            TaskKind::GenderPrediction => &[Label::Male, Label::Female],
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vote" => Ok(TaskKind::VotePrediction),
            "gender" => Ok(TaskKind::GenderPrediction),
            _ => Err(format!("unknown task `{s}` (expected vote or gender)")),
        }
    }
}

/// A predicted or ground-truth answer for either task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    For,
    Against,
    Abstain,
    Male,
    Female,
}

impl Label {
    pub fn task(self) -> TaskKind {
        match self {
            Label::For | Label::Against | Label::Abstain => TaskKind::VotePrediction,
            Label::Male | Label::Female => TaskKind::GenderPrediction,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::For => "For",
            Label::Against => "Against",
            Label::Abstain => "Abstain",
            Label::Male => "Male",
            Label::Female => "Female",
        }
    }

    pub fn as_gender(self) -> Option<Gender> {
        match self {
            Label::Male => Some(Gender::Male),
            Label::Female => Some(Gender::Female),
            _ => None,
        }
    }

    pub(crate) fn from_word(word: &str) -> Option<Label> {
        match word.to_ascii_lowercase().as_str() {
            "for" => Some(Label::For),
            "against" => Some(Label::Against),
            "abstain" => Some(Label::Abstain),
            "male" => Some(Label::Male),
            "female" => Some(Label::Female),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<VoteChoice> for Label {
    fn from(c: VoteChoice) -> Self {
        match c {
            VoteChoice::For => Label::For,
            VoteChoice::Against => Label::Against,
            VoteChoice::Abstain => Label::Abstain,
        }
    }
}

impl From<Gender> for Label {
    fn from(g: Gender) -> Self {
        match g {
            Gender::Male => Label::Male,
            Gender::Female => Label::Female,
        }
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 0.3;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.max_output_tokens == 0 {
            return Err("max_output_tokens must be positive".into());
        }
        Ok(())
    }
}

/// Provider-qualified model name, written `provider/model`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelId {
    pub provider_id: String,
    pub model_name: String,
}

impl ModelId {
    pub fn new(provider_id: impl Into<String>, model_name: impl Into<String>) -> Self {
        ModelId {
            provider_id: provider_id.into(),
            model_name: model_name.into(),
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.provider_id, self.model_name)
    }
}

impl FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('/') {
            Some((p, m)) if !p.is_empty() && !m.is_empty() => Ok(ModelId::new(p, m)),
            _ => Err(format!("model id `{s}` is not of the form provider/model")),
        }
    }
}

impl Serialize for ModelId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Endpoint value marking the in-tree scripted provider.
pub const STUB_ENDPOINT: &str = "stub";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub provider_id: String,
    pub model_name: String,
    /// Provider URL, or [`STUB_ENDPOINT`].
    pub endpoint: String,
}

impl ModelSpec {
    pub fn id(&self) -> ModelId {
        ModelId::new(&self.provider_id, &self.model_name)
    }

    pub fn is_stub(&self) -> bool {
        self.endpoint == STUB_ENDPOINT
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_generation_settings() {
        let p = GenerationParams::default();
        assert_eq!(p.temperature, 0.3);
        assert_eq!(p.max_output_tokens, 512);
        assert!(p.validate().is_ok());
        assert!(GenerationParams { temperature: 2.5, ..p }.validate().is_err());
        assert!(GenerationParams { max_output_tokens: 0, ..p }.validate().is_err());
    }

    #[test]
    fn model_id_parsing() {
        assert_eq!("stub/alpha".parse::<ModelId>(), Ok(ModelId::new("stub", "alpha")));
        assert_eq!(
            "openrouter/meta/llama-3.2".parse::<ModelId>(),
            Ok(ModelId::new("openrouter", "meta/llama-3.2"))
        );
        assert!("alpha".parse::<ModelId>().is_err());
        assert!("/alpha".parse::<ModelId>().is_err());
    }

    #[test]
    fn label_sets_are_disjoint() {
        for l in TaskKind::VotePrediction.labels() {
            assert_eq!(l.task(), TaskKind::VotePrediction);
            assert!(!TaskKind::GenderPrediction.labels().contains(l));
        }
    }
}
