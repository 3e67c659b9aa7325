//! Extraction of `label` / `confidence` / `reasoning` answers from free model
//! output.
//!
//! The accepted shape is one `key: value` line per field. Keys are matched
//! case-insensitively and may be wrapped in markdown emphasis, list markers
//! or JSON quotes, so `**Label:** Against`, `- confidence = 4/5` and
//! `"reasoning": "..."` are all read. Prose before, between and after the
//! key lines is ignored. When a key appears more than once the last
//! occurrence wins; reasoning continues over following lines until the next
//! key line.

use serde::{Deserialize, Serialize};

use super::provider::RawResponse;
use super::{Label, TaskKind};

pub const MIN_CONFIDENCE: u8 = 1;
pub const MAX_CONFIDENCE: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedPrediction {
    pub label: Label,
    pub confidence: u8,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("unparseable output: {0}")]
    UnparseableOutput(String),
    #[error("confidence {0} outside 1..=5")]
    OutOfRangeConfidence(i64),
    #[error("label {label} does not belong to the {task} task")]
    WrongLabelSet { label: Label, task: TaskKind },
}

/// Renders an answer in the exact shape the prompts ask for.
pub fn format_answer(label: Label, confidence: u8, reasoning: &str) -> String {
    format!("label: {label}\nconfidence: {confidence}\nreasoning: {reasoning}")
}

pub fn parse_prediction(raw: &RawResponse, task: TaskKind) -> Result<ParsedPrediction, ParseError> {
    parse_answer(&raw.text, task)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Key {
    Label,
    Confidence,
    Reasoning,
}

const KEYS: [(&str, Key); 3] = [
    ("label", Key::Label),
    ("confidence", Key::Confidence),
    ("reasoning", Key::Reasoning),
];

fn is_decoration(c: char) -> bool {
    c.is_whitespace() || matches!(c, '*' | '_' | '`' | '#' | '>' | '-' | '"' | '\'' | '{' | ',')
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let head = s.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &s[prefix.len()..])
}

/// Splits a line into (key, value) when it is a key line.
fn key_line(line: &str) -> Option<(Key, &str)> {
    let body = line.trim_start_matches(is_decoration);
    KEYS.iter().find_map(|&(name, key)| {
        let rest = strip_prefix_ci(body, name)?;
        let rest = rest.trim_start_matches(['*', '_', '`', '"', '\'', ' ', '\t']);
        let rest = rest.strip_prefix(':').or_else(|| rest.strip_prefix('='))?;
        Some((key, rest))
    })
}

fn clean_value(value: &str) -> &str {
    value
        .trim()
        .trim_start_matches(|c: char| matches!(c, '*' | '_' | '`' | '"') || c.is_whitespace())
        .trim_end_matches(|c: char| matches!(c, '*' | '_' | '`' | '"' | ',' | '}') || c.is_whitespace())
}

fn parse_label(value: &str, task: TaskKind) -> Result<Label, ParseError> {
    let word: String = value
        .trim_start_matches(|c: char| !c.is_alphabetic())
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect();
    match Label::from_word(&word) {
        Some(label) if label.task() == task => Ok(label),
        Some(label) => Err(ParseError::WrongLabelSet { label, task }),
        None => Err(ParseError::UnparseableOutput(format!(
            "label value `{}` is not one of the task labels",
            value.chars().take(40).collect::<String>()
        ))),
    }
}

fn parse_confidence(value: &str) -> Result<u8, ParseError> {
    let start = value
        .find(|c: char| c.is_ascii_digit())
        .ok_or_else(|| ParseError::UnparseableOutput("confidence has no number".into()))?;
    let negative = value[..start].trim_end().ends_with('-');
    let digits: String = value[start..].chars().take_while(|c| c.is_ascii_digit()).collect();
    let magnitude = digits.parse::<i64>().unwrap_or(i64::MAX);
    let n = if negative { -magnitude } else { magnitude };
    if (i64::from(MIN_CONFIDENCE)..=i64::from(MAX_CONFIDENCE)).contains(&n) {
        Ok(n as u8)
    } else {
        Err(ParseError::OutOfRangeConfidence(n))
    }
}

pub fn parse_answer(text: &str, task: TaskKind) -> Result<ParsedPrediction, ParseError> {
    let mut label_value = None;
    let mut confidence_value = None;
    let mut reasoning: Option<Vec<&str>> = None;
    let mut in_reasoning = false;

    for line in text.lines() {
        match key_line(line) {
            Some((Key::Label, v)) => {
                label_value = Some(v);
                in_reasoning = false;
            }
            Some((Key::Confidence, v)) => {
                confidence_value = Some(v);
                in_reasoning = false;
            }
            Some((Key::Reasoning, v)) => {
                reasoning = Some(vec![v]);
                in_reasoning = true;
            }
            None if in_reasoning => {
                if let Some(lines) = reasoning.as_mut() {
                    lines.push(line);
                }
            }
            None => {}
        }
    }

    let label_value =
        label_value.ok_or_else(|| ParseError::UnparseableOutput("no label line found".into()))?;
    let label = parse_label(clean_value(label_value), task)?;
    let confidence_value = confidence_value
        .ok_or_else(|| ParseError::UnparseableOutput("no confidence line found".into()))?;
    let confidence = parse_confidence(clean_value(confidence_value))?;
    let reasoning = reasoning
        .map(|lines| clean_value(&lines.join("\n")).to_string())
        .filter(|r| !r.is_empty())
        .ok_or_else(|| ParseError::UnparseableOutput("no reasoning given".into()))?;

    Ok(ParsedPrediction {
        label,
        confidence,
        reasoning,
    })
}
