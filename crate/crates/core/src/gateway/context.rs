use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TaskKind;
use crate::corpus::{age_in_years, Corpus, Gender};

/// A speaker or debate attribute that may be disclosed in a prompt.
/// Declaration order is the order of the attribute sentences in a prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Topic,
    Gender,
    Age,
    Country,
    PoliticalGroup,
}

impl Attribute {
    pub const ALL: [Attribute; 5] = [
        Attribute::Topic,
        Attribute::Gender,
        Attribute::Age,
        Attribute::Country,
        Attribute::PoliticalGroup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Topic => "topic",
            Attribute::Gender => "gender",
            Attribute::Age => "age",
            Attribute::Country => "country",
            Attribute::PoliticalGroup => "political_group",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Attribute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Attribute::ALL
            .into_iter()
            .find(|a| a.as_str() == s || (s == "group" && *a == Attribute::PoliticalGroup))
            .ok_or_else(|| format!("unknown attribute `{s}`"))
    }
}

/// Which attributes enter a prompt, plus counterfactual replacement values.
/// The speech text itself is always included.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContextConfig {
    pub include_topic: bool,
    pub include_gender: bool,
    pub include_age: bool,
    pub include_country: bool,
    pub include_political_group: bool,
    pub overrides: BTreeMap<Attribute, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("unknown speech `{0}`")]
    UnknownSpeech(String),
    #[error("illegal override of `{attribute}`: {reason}")]
    IllegalOverride { attribute: Attribute, reason: String },
    #[error("invalid context config: {0}")]
    InvalidConfig(String),
}

impl ContextConfig {
    /// Speech-only baseline.
    pub fn speech_only() -> Self {
        Self::default()
    }

    pub fn with(attributes: &[Attribute]) -> Self {
        let mut config = Self::default();
        for &a in attributes {
            config.set_included(a, true);
        }
        config
    }

    pub fn includes(&self, attribute: Attribute) -> bool {
        match attribute {
            Attribute::Topic => self.include_topic,
            Attribute::Gender => self.include_gender,
            Attribute::Age => self.include_age,
            Attribute::Country => self.include_country,
            Attribute::PoliticalGroup => self.include_political_group,
        }
    }

    pub fn set_included(&mut self, attribute: Attribute, on: bool) {
        let flag = match attribute {
            Attribute::Topic => &mut self.include_topic,
            Attribute::Gender => &mut self.include_gender,
            Attribute::Age => &mut self.include_age,
            Attribute::Country => &mut self.include_country,
            Attribute::PoliticalGroup => &mut self.include_political_group,
        };
        *flag = on;
    }

    pub fn included(&self) -> Vec<Attribute> {
        Attribute::ALL.into_iter().filter(|a| self.includes(*a)).collect()
    }

    /// Checks the config against the task's rules and normalises override
    /// values (single-line, canonical gender spelling).
    pub fn validate(&self, task: TaskKind) -> Result<BTreeMap<Attribute, String>, ContextError> {
        if task == TaskKind::GenderPrediction && self.include_gender {
            return Err(ContextError::InvalidConfig(
                "gender cannot be disclosed in the gender prediction task".into(),
            ));
        }
        let mut normalised = BTreeMap::new();
        for (&attribute, value) in &self.overrides {
            let illegal = |reason: &str| ContextError::IllegalOverride {
                attribute,
                reason: reason.to_string(),
            };
            if task == TaskKind::GenderPrediction && attribute == Attribute::Gender {
                return Err(illegal("gender cannot be overridden in the gender prediction task"));
            }
            if !self.includes(attribute) {
                return Err(illegal("attribute is not included in the context"));
            }
            let value = value.split_whitespace().collect::<Vec<_>>().join(" ");
            if value.is_empty() {
                return Err(illegal("override value is empty"));
            }
            let value = match attribute {
                Attribute::Gender => value
                    .parse::<Gender>()
                    .map_err(|e| illegal(&e))?
                    .to_string(),
                Attribute::Age => match value.parse::<u32>() {
                    Ok(age) if age <= 130 => age.to_string(),
                    _ => return Err(illegal("age must be a whole number of years")),
                },
                _ => value,
            };
            normalised.insert(attribute, value);
        }
        Ok(normalised)
    }
}

/// Attribute values actually shown to the model, after overrides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedContext {
    pub task: TaskKind,
    pub speech_id: String,
    pub attributes: BTreeMap<Attribute, String>,
    /// Attributes whose value came from an override rather than the corpus.
    #[serde(default)]
    pub overridden: BTreeSet<Attribute>,
}

impl ResolvedContext {
    /// Attribute-level differences from `other`: (attribute, ours, theirs).
    pub fn diff(&self, other: &ResolvedContext) -> Vec<(Attribute, Option<String>, Option<String>)> {
        Attribute::ALL
            .into_iter()
            .filter_map(|a| {
                let ours = self.attributes.get(&a);
                let theirs = other.attributes.get(&a);
                (ours != theirs).then(|| (a, ours.cloned(), theirs.cloned()))
            })
            .collect()
    }
}

pub fn resolve_context(
    corpus: &Corpus,
    speech_id: &str,
    config: &ContextConfig,
    task: TaskKind,
) -> Result<ResolvedContext, ContextError> {
    let overrides = config.validate(task)?;
    let speech = corpus
        .speech(speech_id)
        .ok_or_else(|| ContextError::UnknownSpeech(speech_id.to_string()))?;
    let debate = corpus.debate(&speech.debate_id);
    let mep = corpus.mep(&speech.mep_id);

    let ground_truth = |attribute: Attribute| -> Option<String> {
        match attribute {
            Attribute::Topic => debate.map(|d| d.topic.clone()),
            Attribute::Gender => mep.map(|m| m.gender.to_string()),
            Attribute::Age => {
                let (m, d) = (mep?, debate?);
                age_in_years(m.birth_date, d.date).map(|a| a.to_string())
            }
            Attribute::Country => mep.map(|m| m.country.clone()),
            Attribute::PoliticalGroup => {
                let m = mep?;
                Some(corpus.group(&m.group_id).map_or_else(|| m.group_id.clone(), |g| g.name.clone()))
            }
        }
    };

    let mut attributes = BTreeMap::new();
    let mut overridden = BTreeSet::new();
    for attribute in config.included() {
        let value = match overrides.get(&attribute) {
            Some(v) if attribute == Attribute::PoliticalGroup => {
                overridden.insert(attribute);
                // a group id is shown under its display name
                corpus.group(v).map_or_else(|| v.clone(), |g| g.name.clone())
            }
            Some(v) => {
                overridden.insert(attribute);
                v.clone()
            }
            None => match ground_truth(attribute) {
                Some(v) => v,
                None => continue,
            },
        };
        attributes.insert(attribute, value);
    }
    Ok(ResolvedContext {
        task,
        speech_id: speech.id.clone(),
        attributes,
        overridden,
    })
}
