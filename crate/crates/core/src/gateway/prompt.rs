use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::context::{Attribute, ResolvedContext};
use super::TaskKind;
use crate::corpus::{Debate, Speech};

/// Version of the prompt wording below. Bump whenever any template string
/// changes so fingerprints from different wordings never collide.
pub const TEMPLATE_VERSION: &str = "v1";

/// `<template version>:<sha256 hex>` over task, speech id, resolved
/// attributes and template version.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContextFingerprint(String);

impl ContextFingerprint {
    pub fn compute(task: TaskKind, resolved: &ResolvedContext) -> Self {
        let canonical = serde_json::json!({
            "template": TEMPLATE_VERSION,
            "task": task,
            "speech_id": resolved.speech_id,
            "attributes": resolved.attributes,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        ContextFingerprint(format!("{TEMPLATE_VERSION}:{}", hex::encode(digest)))
    }

    pub fn template_version(&self) -> Option<&str> {
        self.0.split_once(':').map(|(v, _)| v)
    }

    pub fn is_known_template(&self) -> bool {
        self.template_version() == Some(TEMPLATE_VERSION)
            && self.0.len() == TEMPLATE_VERSION.len() + 1 + 64
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContextFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<String> for ContextFingerprint {
    fn from(s: String) -> Self {
        ContextFingerprint(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub task: TaskKind,
    pub system_text: String,
    pub user_text: String,
    pub context_fingerprint: ContextFingerprint,
}

/// The one line a prompt devotes to `attribute`.
pub fn attribute_sentence(attribute: Attribute, value: &str) -> String {
    match attribute {
        Attribute::Topic => format!("The debate topic is: {value}."),
        Attribute::Gender => format!("The speaker's gender is {value}."),
        Attribute::Age => format!("The speaker is {value} years old."),
        Attribute::Country => format!("The speaker represents the member state {value}."),
        Attribute::PoliticalGroup => format!("The speaker belongs to the political group {value}."),
    }
}

/// Prefix shared by every sentence [`attribute_sentence`] emits for `attribute`.
pub fn attribute_sentence_prefix(attribute: Attribute) -> &'static str {
    match attribute {
        Attribute::Topic => "The debate topic is: ",
        Attribute::Gender => "The speaker's gender is ",
        Attribute::Age => "The speaker is ",
        Attribute::Country => "The speaker represents the member state ",
        Attribute::PoliticalGroup => "The speaker belongs to the political group ",
    }
}

const SYSTEM_TEXT: &str = "You are a political analyst studying speeches from European Parliament \
debates. Base your answer on the speech and on the context you are given.";

const VOTE_INSTRUCTION: &str = "Predict how the speaker voted in the roll-call vote that closed this debate.
Answer with exactly three lines:
label: For, Against or Abstain
confidence: an integer from 1 (pure guess) to 5 (certain)
reasoning: a short justification of your prediction";

const GENDER_INSTRUCTION: &str = "Predict the gender of the speaker.
Answer with exactly three lines:
label: Male or Female
confidence: an integer from 1 (pure guess) to 5 (certain)
reasoning: a short justification of your prediction";

/// Renders the prompt for one speaker. The debate is accepted for the
/// caller's convenience; only the resolved attributes reach the text, so a
/// speech-only context yields a speech-only prompt.
pub fn build_prompt(task: TaskKind, _debate: &Debate, speech: &Speech, resolved: &ResolvedContext) -> Prompt {
    let mut user_text = String::new();
    for (&attribute, value) in &resolved.attributes {
        user_text.push_str(&attribute_sentence(attribute, value));
        user_text.push('\n');
    }
    user_text.push_str("Speech:\n\"\"\"\n");
    user_text.push_str(&speech.text);
    user_text.push_str("\n\"\"\"\n\n");
    user_text.push_str(match task {
        TaskKind::VotePrediction => VOTE_INSTRUCTION,
        TaskKind::GenderPrediction => GENDER_INSTRUCTION,
    });
    Prompt {
        task,
        system_text: SYSTEM_TEXT.to_string(),
        user_text,
        context_fingerprint: ContextFingerprint::compute(task, resolved),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_corpus;
    use crate::gateway::{resolve_context, ContextConfig};

    fn fixture() -> crate::corpus::Corpus {
        load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/corpus")).unwrap()
    }

    fn prompt_for(config: &ContextConfig, task: TaskKind) -> Prompt {
        let corpus = fixture();
        let speech = corpus.speech("S1").unwrap();
        let debate = corpus.debate(&speech.debate_id).unwrap();
        let resolved = resolve_context(&corpus, "S1", config, task).unwrap();
        build_prompt(task, debate, speech, &resolved)
    }

    #[test]
    fn topic_and_speech_context() {
        let p = prompt_for(&ContextConfig::with(&[Attribute::Topic]), TaskKind::VotePrediction);
        assert!(p.user_text.contains("The debate topic is: environment."));
        assert!(p.user_text.contains("products that break after two years"));
        assert!(p.user_text.contains("label: For, Against or Abstain"));
        assert!(p.user_text.contains("confidence:"));
        assert!(p.user_text.contains("reasoning:"));
    }

    #[test]
    fn country_flag_changes_exactly_one_line() {
        let base = ContextConfig::with(&[Attribute::Topic, Attribute::Gender]);
        let mut with_country = base.clone();
        with_country.include_country = true;
        let a = prompt_for(&base, TaskKind::VotePrediction);
        let b = prompt_for(&with_country, TaskKind::VotePrediction);
        let a_lines: Vec<_> = a.user_text.lines().collect();
        let b_lines: Vec<_> = b.user_text.lines().collect();
        assert_eq!(b_lines.len(), a_lines.len() + 1);
        let extra: Vec<_> = b_lines.iter().filter(|l| !a_lines.contains(l)).collect();
        assert_eq!(extra, [&"The speaker represents the member state DE."]);
        assert_eq!(a.system_text, b.system_text);
    }

    #[test]
    fn prompts_are_deterministic() {
        let config = ContextConfig::with(&Attribute::ALL);
        let a = prompt_for(&config, TaskKind::VotePrediction);
        let b = prompt_for(&config, TaskKind::VotePrediction);
        assert_eq!(a, b);
        assert!(a.context_fingerprint.is_known_template());
        let g = prompt_for(&ContextConfig::with(&[Attribute::Topic]), TaskKind::GenderPrediction);
        assert_ne!(g.context_fingerprint, prompt_for(&ContextConfig::with(&[Attribute::Topic]), TaskKind::VotePrediction).context_fingerprint);
    }

    #[test]
    fn speech_only_prompt_has_no_attribute_lines() {
        let p = prompt_for(&ContextConfig::speech_only(), TaskKind::GenderPrediction);
        assert!(p.user_text.starts_with("Speech:\n"));
        for a in Attribute::ALL {
            assert!(!p.user_text.contains(attribute_sentence_prefix(a)), "{a}");
        }
    }
}
