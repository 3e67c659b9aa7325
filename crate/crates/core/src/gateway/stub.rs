//! Deterministic, script-driven provider used by tests, the acceptance
//! suite and offline demos.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::parse::format_answer;
use super::provider::{Provider, ProviderError, RawResponse};
use super::{GenerationParams, Label, ModelSpec, Prompt, TaskKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StubReply {
    /// Return this text verbatim.
    Text { text: String },
    /// Return a well-formed answer.
    Answer {
        label: Label,
        confidence: u8,
        reasoning: String,
    },
    /// Derive a well-formed answer from the seed and the prompt fingerprint.
    Seeded { seed: u64 },
    /// Never answer; the gateway's attempt timeout fires.
    Hang,
    Refuse {
        #[serde(default)]
        status: Option<u16>,
        #[serde(default)]
        message: String,
    },
    /// Produce a payload the adapter cannot decode.
    Malformed,
    /// Fail with a transport error on the first `failures` calls, then
    /// behave as `then`.
    Flaky { failures: u32, then: Box<StubReply> },
}

impl Default for StubReply {
    fn default() -> Self {
        StubReply::Seeded { seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubRule {
    /// Fires when the prompt's user text contains this string.
    pub when_contains: String,
    pub reply: StubReply,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StubScript {
    pub rules: Vec<StubRule>,
    #[serde(rename = "default")]
    pub fallback: StubReply,
    pub latency_ms: u64,
}

impl StubScript {
    pub fn always(reply: StubReply) -> Self {
        StubScript {
            fallback: reply,
            ..Default::default()
        }
    }

    fn reply_for(&self, prompt: &Prompt) -> &StubReply {
        self.rules
            .iter()
            .find(|r| prompt.user_text.contains(&r.when_contains))
            .map_or(&self.fallback, |r| &r.reply)
    }
}

/// What the stub saw on one call.
#[derive(Debug, Clone, PartialEq)]
pub struct StubCall {
    pub model_name: String,
    pub prompt: Prompt,
    pub params: GenerationParams,
}

#[derive(Debug, Default)]
pub struct StubProvider {
    provider_id: String,
    scripts: BTreeMap<String, StubScript>,
    flaky_counters: Mutex<BTreeMap<String, AtomicU32>>,
    calls: Mutex<Vec<StubCall>>,
}

impl StubProvider {
    pub fn new(provider_id: impl Into<String>) -> Self {
        StubProvider {
            provider_id: provider_id.into(),
            ..Default::default()
        }
    }

    pub fn with_model(mut self, model_name: impl Into<String>, script: StubScript) -> Self {
        self.scripts.insert(model_name.into(), script);
        self
    }

    pub fn calls(&self) -> Vec<StubCall> {
        self.calls.lock().expect("stub call log poisoned").clone()
    }

    fn flaky_call_index(&self, model_name: &str) -> u32 {
        let mut counters = self.flaky_counters.lock().expect("stub counters poisoned");
        counters
            .entry(model_name.to_string())
            .or_default()
            .fetch_add(1, Ordering::SeqCst)
    }

    /// Peels `Flaky` layers off a reply, failing while a layer still has
    /// failures to hand out.
    fn settle<'a>(&self, mut reply: &'a StubReply, model_name: &str) -> Result<&'a StubReply, ProviderError> {
        while let StubReply::Flaky { failures, then } = reply {
            if self.flaky_call_index(model_name) < *failures {
                return Err(ProviderError::Transport("connection reset by stub".into()));
            }
            reply = then;
        }
        Ok(reply)
    }
}

fn render(reply: &StubReply, prompt: &Prompt) -> Result<String, ProviderError> {
    match reply {
        StubReply::Text { text } => Ok(text.clone()),
        StubReply::Answer {
            label,
            confidence,
            reasoning,
        } => Ok(format_answer(*label, *confidence, reasoning)),
        StubReply::Seeded { seed } => Ok(seeded_answer(*seed, prompt)),
        StubReply::Refuse { status, message } => Err(ProviderError::Refusal {
            status: *status,
            message: message.clone(),
        }),
        StubReply::Malformed => Err(ProviderError::Transport(
            "malformed payload: expected a completion body".into(),
        )),
        StubReply::Hang | StubReply::Flaky { .. } => {
            unreachable!("hang and flaky replies are settled before rendering")
        }
    }
}

#[async_trait]
impl Provider for StubProvider {
    async fn complete(
        &self,
        model: &ModelSpec,
        prompt: &Prompt,
        params: &GenerationParams,
    ) -> Result<RawResponse, ProviderError> {
        let started = Instant::now();
        self.calls.lock().expect("stub call log poisoned").push(StubCall {
            model_name: model.model_name.clone(),
            prompt: prompt.clone(),
            params: *params,
        });
        let script = self.scripts.get(&model.model_name).ok_or_else(|| ProviderError::Refusal {
            status: Some(404),
            message: format!("stub has no script for model {}", model.model_name),
        })?;
        if script.latency_ms > 0 {
            tokio::time::sleep(Duration::from_millis(script.latency_ms)).await;
        }
        let reply = self.settle(script.reply_for(prompt), &model.model_name)?;
        if *reply == StubReply::Hang {
            std::future::pending::<()>().await;
        }
        let text = render(reply, prompt)?;
        Ok(RawResponse {
            text,
            latency_ms: started.elapsed().as_millis() as u64,
            provider_id: self.provider_id.clone(),
            model_name: model.model_name.clone(),
            attempts: 1,
            metadata: BTreeMap::from([("adapter".to_string(), "stub".to_string())]),
        })
    }
}

const MALE_CUES: [&str; 5] = ["assertive", "direct", "structured", "confrontational", "technical"];
const FEMALE_CUES: [&str; 3] = ["emotional", "personal", "empathetic"];
const TOPICS: [&str; 6] = [
    "economic",
    "geopolitical",
    "human rights",
    "women's rights",
    "gender-mainstreaming",
    "migration policy",
];
const VOTE_AGAINST: [&str; 3] = [
    "The phrase national sovereignty signals opposition to the proposal.",
    "References to protecting borders indicate the speaker rejects the text.",
    "The speaker stresses costs for small businesses and national authorities.",
];
const VOTE_FOR: [&str; 4] = [
    "The speaker criticizes the proposal as bureaucratic, suggesting a desire to improve it.",
    "It is unclear where the speaker stands; leaning for.",
    "The speaker mentions climate goals and human rights, which signals support.",
    "The speaker welcomes the compromise as a step forward.",
];
const VOTE_ABSTAIN: [&str; 2] = [
    "The speaker voices mixed feelings and no clear preference.",
    "Support and reservations are balanced in the speech.",
];

/// Deterministic pseudo-answer keyed on (seed, prompt fingerprint).
fn seeded_answer(seed: u64, prompt: &Prompt) -> String {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(prompt.context_fingerprint.as_str().as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(key);
    let confidence = rng.random_range(2..=5u8);

    match prompt.task {
        TaskKind::GenderPrediction => {
            let label = if rng.random_bool(0.6) { Label::Male } else { Label::Female };
            let cues: &[&str] = if label == Label::Male { &MALE_CUES } else { &FEMALE_CUES };
            let cue = cues[rng.random_range(0..cues.len())];
            let topic = TOPICS[rng.random_range(0..TOPICS.len())];
            let reasoning = format!(
                "The speaker's {cue} style and focus on {topic} issues suggest a {} speaker.",
                label.as_str().to_lowercase()
            );
            format_answer(label, confidence, &reasoning)
        }
        TaskKind::VotePrediction => {
            let roll: f64 = rng.random();
            let (label, bank): (Label, &[&str]) = if roll < 0.55 {
                (Label::For, &VOTE_FOR)
            } else if roll < 0.9 {
                (Label::Against, &VOTE_AGAINST)
            } else {
                (Label::Abstain, &VOTE_ABSTAIN)
            };
            let reasoning = bank[rng.random_range(0..bank.len())];
            format_answer(label, confidence, reasoning)
        }
    }
}
