use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::text::{tokenize, PhraseIndex};
use super::{AnalysisError, ErrorCase};
use crate::gateway::{Label, TaskKind};

const DEFAULT_RULES: &str = include_str!("../../data/failure_rules.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    KeywordReliance,
    CriticismAsReform,
    UncertaintyDefaultFor,
    Other,
}

impl FailureCategory {
    /// The categories a rule can assign; `Other` means none fired.
    pub const RULED: [FailureCategory; 3] = [
        FailureCategory::KeywordReliance,
        FailureCategory::CriticismAsReform,
        FailureCategory::UncertaintyDefaultFor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureCategory::KeywordReliance => "keyword_reliance",
            FailureCategory::CriticismAsReform => "criticism_as_reform",
            FailureCategory::UncertaintyDefaultFor => "uncertainty_default_for",
            FailureCategory::Other => "other",
        }
    }
}

impl fmt::Display for FailureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordRule {
    pub against_triggers: Vec<String>,
    pub for_triggers: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticismRule {
    pub criticism_markers: Vec<String>,
    pub reform_markers: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UncertaintyRule {
    pub markers: Vec<String>,
}

/// Serialized form of a [`FailureRuleset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulesetSpec {
    pub version: String,
    pub keyword_reliance: KeywordRule,
    pub criticism_as_reform: CriticismRule,
    pub uncertainty_default_for: UncertaintyRule,
}

#[derive(Debug, thiserror::Error)]
pub enum RulesetError {
    #[error("cannot read ruleset {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid ruleset: {0}")]
    Invalid(String),
}

/// Versioned trigger lists that map a vote-prediction error's reasoning to
/// failure categories:
///
/// * keyword reliance: an against-trigger with an Against prediction, or a
///   for-trigger with a For prediction;
/// * criticism as reform: a For prediction whose reasoning has both a
///   criticism marker and a reform marker;
/// * uncertainty defaulting to For: a For prediction whose reasoning has an
///   uncertainty marker.
#[derive(Debug, Clone)]
pub struct FailureRuleset {
    spec: RulesetSpec,
    against: PhraseIndex,
    for_: PhraseIndex,
    criticism: PhraseIndex,
    reform: PhraseIndex,
    uncertainty: PhraseIndex,
}

impl FailureRuleset {
    pub fn new(spec: RulesetSpec) -> Result<Self, RulesetError> {
        if spec.version.trim().is_empty() {
            return Err(RulesetError::Invalid("version must be non-empty".into()));
        }
        let build = |name: &str, phrases: &[String]| -> Result<PhraseIndex, RulesetError> {
            if phrases.is_empty() {
                return Err(RulesetError::Invalid(format!("{name} is empty")));
            }
            let mut idx = PhraseIndex::default();
            for (i, p) in phrases.iter().enumerate() {
                if !idx.insert(p, i) {
                    return Err(RulesetError::Invalid(format!("{name}: `{p}` has no words")));
                }
            }
            Ok(idx)
        };
        Ok(FailureRuleset {
            against: build("keyword_reliance.against_triggers", &spec.keyword_reliance.against_triggers)?,
            for_: build("keyword_reliance.for_triggers", &spec.keyword_reliance.for_triggers)?,
            criticism: build("criticism_as_reform.criticism_markers", &spec.criticism_as_reform.criticism_markers)?,
            reform: build("criticism_as_reform.reform_markers", &spec.criticism_as_reform.reform_markers)?,
            uncertainty: build("uncertainty_default_for.markers", &spec.uncertainty_default_for.markers)?,
            spec,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, RulesetError> {
        let spec: RulesetSpec = toml::from_str(text).map_err(|e| RulesetError::Invalid(e.to_string()))?;
        Self::new(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, RulesetError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RulesetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn default_rules() -> Self {
        Self::from_toml(DEFAULT_RULES).expect("bundled failure ruleset is valid")
    }

    pub fn version(&self) -> &str {
        &self.spec.version
    }

    pub fn spec(&self) -> &RulesetSpec {
        &self.spec
    }

    /// Categories for one reasoning trace and predicted vote.
    pub fn classify_text(&self, reasoning: &str, predicted: Label) -> BTreeSet<FailureCategory> {
        let words = tokenize(reasoning);
        let mut out = BTreeSet::new();
        let keyword = match predicted {
            Label::Against => self.against.any(&words),
            Label::For => self.for_.any(&words),
            _ => false,
        };
        if keyword {
            out.insert(FailureCategory::KeywordReliance);
        }
        if predicted == Label::For {
            if self.criticism.any(&words) && self.reform.any(&words) {
                out.insert(FailureCategory::CriticismAsReform);
            }
            if self.uncertainty.any(&words) {
                out.insert(FailureCategory::UncertaintyDefaultFor);
            }
        }
        if out.is_empty() {
            out.insert(FailureCategory::Other);
        }
        out
    }
}

/// Every category whose rule fires for `case`; exactly `{Other}` when none
/// does.
pub fn classify_failure(case: &ErrorCase, ruleset: &FailureRuleset) -> Result<BTreeSet<FailureCategory>, AnalysisError> {
    if case.task != TaskKind::VotePrediction {
        return Err(AnalysisError::WrongTask {
            record_id: case.record_id.clone(),
            expected: TaskKind::VotePrediction,
        });
    }
    Ok(ruleset.classify_text(&case.reasoning, case.predicted))
}
