//! Mining the reasoning of high-confidence errors: stereotype cue counts,
//! topic–gender associations and rule-based failure categories.

mod failure;
mod lexicon;
mod report;
mod text;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Gender;
use crate::gateway::{Label, ModelId, TaskKind};
use crate::store::PredictionRecord;

pub use failure::{
    classify_failure, CriticismRule, FailureCategory, FailureRuleset, KeywordRule, RulesetError, RulesetSpec,
    UncertaintyRule,
};
pub use lexicon::{Lexicon, LexiconEntry, LexiconError, StereotypeLexicon, TopicLexicon};
pub use report::{write_report, AnalysisReport, ReportFiles};
pub use text::tokenize;

pub const DEFAULT_CONFIDENCE_THRESHOLD: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("threshold {0} outside 1..=5")]
    InvalidThreshold(u8),
    #[error("record {record_id} is not a {expected} case")]
    WrongTask { record_id: String, expected: TaskKind },
}

/// A wrong prediction together with the reasoning that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCase {
    pub record_id: String,
    pub task: TaskKind,
    pub model: ModelId,
    pub speech_id: String,
    pub predicted: Label,
    pub ground_truth: Label,
    pub confidence: u8,
    pub reasoning: String,
}

impl From<&PredictionRecord> for ErrorCase {
    fn from(r: &PredictionRecord) -> Self {
        ErrorCase {
            record_id: r.record_id.clone(),
            task: r.task,
            model: r.model.clone(),
            speech_id: r.speech_id.clone(),
            predicted: r.parsed.label,
            ground_truth: r.ground_truth,
            confidence: r.parsed.confidence,
            reasoning: r.parsed.reasoning.clone(),
        }
    }
}

/// Wrong predictions with confidence at or above `threshold`. `task: None`
/// pools both tasks.
pub fn high_confidence_errors(
    records: &[PredictionRecord],
    task: Option<TaskKind>,
    threshold: u8,
) -> Result<Vec<ErrorCase>, AnalysisError> {
    if !(1..=5).contains(&threshold) {
        return Err(AnalysisError::InvalidThreshold(threshold));
    }
    Ok(records
        .iter()
        .filter(|r| !r.correct && r.parsed.confidence >= threshold && task.is_none_or(|t| r.task == t))
        .map(ErrorCase::from)
        .collect())
}

/// Whether a term counts once per case or once per mention.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    #[default]
    Case,
    Mention,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermRow {
    pub term: String,
    pub assumed_gender: Gender,
    pub occurrences: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermTable {
    pub mode: CountMode,
    pub rows: Vec<TermRow>,
}

impl TermTable {
    pub fn get(&self, term: &str) -> Option<usize> {
        self.rows.iter().find(|r| r.term == term).map(|r| r.occurrences)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["term", "assumed_gender", "occurrences"]).expect("in-memory csv");
        for r in &self.rows {
            w.write_record([r.term.as_str(), r.assumed_gender.as_str(), &r.occurrences.to_string()])
                .expect("in-memory csv");
        }
        finish(w)
    }
}

/// Occurrences of each lexicon term across `errors`, whole-word and
/// case-insensitive. In [`CountMode::Case`] a term counts at most once per
/// case; a case hitting several terms counts toward each. Terms that never
/// occur are omitted. Rows run by occurrences descending, then term.
pub fn count_stereotype_terms(errors: &[ErrorCase], lexicon: &StereotypeLexicon, mode: CountMode) -> TermTable {
    let mut counts = vec![0usize; lexicon.entries().len()];
    for case in errors {
        for (id, n) in lexicon.mentions(&tokenize(&case.reasoning)) {
            counts[id] += match mode {
                CountMode::Case => 1,
                CountMode::Mention => n,
            };
        }
    }
    let mut rows: Vec<TermRow> = lexicon
        .entries()
        .iter()
        .zip(counts)
        .filter(|(_, n)| *n > 0)
        .map(|(e, occurrences)| TermRow {
            term: e.term.clone(),
            assumed_gender: e.gender,
            occurrences,
        })
        .collect();
    rows.sort_by(|a, b| b.occurrences.cmp(&a.occurrences).then_with(|| a.term.cmp(&b.term)));
    TermTable { mode, rows }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicRow {
    pub keyword: String,
    pub stereotype_gender: Gender,
    pub male_pred: usize,
    pub female_pred: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicTable {
    pub rows: Vec<TopicRow>,
}

impl TopicTable {
    pub fn get(&self, keyword: &str) -> Option<&TopicRow> {
        self.rows.iter().find(|r| r.keyword == keyword)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["keyword", "stereotype_gender", "male_pred", "female_pred", "total"])
            .expect("in-memory csv");
        for r in &self.rows {
            w.write_record([
                r.keyword.as_str(),
                r.stereotype_gender.as_str(),
                &r.male_pred.to_string(),
                &r.female_pred.to_string(),
                &r.total.to_string(),
            ])
            .expect("in-memory csv");
        }
        finish(w)
    }
}

/// Per keyword, how many gender-task error cases mention it, split by the
/// predicted gender. Keywords with no mention are omitted; rows run by
/// total descending, then keyword.
pub fn topic_gender_association(errors: &[ErrorCase], lexicon: &TopicLexicon) -> Result<TopicTable, AnalysisError> {
    let mut counts = vec![(0usize, 0usize); lexicon.entries().len()];
    for case in errors {
        let predicted = match (case.task, case.predicted.as_gender()) {
            (TaskKind::GenderPrediction, Some(g)) => g,
            _ => {
                return Err(AnalysisError::WrongTask {
                    record_id: case.record_id.clone(),
                    expected: TaskKind::GenderPrediction,
                })
            }
        };
        for id in lexicon.mentions(&tokenize(&case.reasoning)).into_keys() {
            match predicted {
                Gender::Male => counts[id].0 += 1,
                Gender::Female => counts[id].1 += 1,
            }
        }
    }
    let mut rows: Vec<TopicRow> = lexicon
        .entries()
        .iter()
        .zip(counts)
        .filter(|(_, (m, f))| m + f > 0)
        .map(|(e, (male_pred, female_pred))| TopicRow {
            keyword: e.term.clone(),
            stereotype_gender: e.gender,
            male_pred,
            female_pred,
            total: male_pred + female_pred,
        })
        .collect();
    rows.sort_by(|a, b| b.total.cmp(&a.total).then_with(|| a.keyword.cmp(&b.keyword)));
    Ok(TopicTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub model: ModelId,
    pub category: FailureCategory,
    /// Error cases of this model carrying the category.
    pub cases: usize,
    /// `cases` as a percentage of the model's error cases.
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelErrorCount {
    pub model: ModelId,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureDistribution {
    pub ruleset_version: String,
    pub models: Vec<ModelErrorCount>,
    /// One row per (model, ruled category), models in id order.
    pub rows: Vec<FailureRow>,
    /// Cases no rule explains, one row per model.
    pub other: Vec<FailureRow>,
}

impl FailureDistribution {
    pub fn pct(&self, model: &ModelId, category: FailureCategory) -> Option<f64> {
        self.rows
            .iter()
            .chain(&self.other)
            .find(|r| r.model == *model && r.category == category)
            .map(|r| r.pct)
    }

    /// Chart rows: model, category, pct (two decimals), ruleset version.
    pub fn to_csv(&self) -> String {
        rows_csv(&self.rows, &self.ruleset_version)
    }

    pub fn other_to_csv(&self) -> String {
        rows_csv(&self.other, &self.ruleset_version)
    }
}

fn rows_csv(rows: &[FailureRow], version: &str) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "category", "pct", "ruleset_version"]).expect("in-memory csv");
    for r in rows {
        w.write_record([r.model.to_string(), r.category.to_string(), format!("{:.2}", r.pct), version.to_string()])
            .expect("in-memory csv");
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

/// Share of each model's vote-task error cases falling into each failure
/// category. A case may carry several categories, so a model's percentages
/// need not sum to 100. Gender-task cases are ignored; models without
/// vote-task errors are omitted.
pub fn failure_distribution(errors: &[ErrorCase], ruleset: &FailureRuleset) -> FailureDistribution {
    let mut per_model: BTreeMap<&ModelId, (usize, BTreeMap<FailureCategory, usize>)> = BTreeMap::new();
    for case in errors.iter().filter(|c| c.task == TaskKind::VotePrediction) {
        let cats: BTreeSet<FailureCategory> = ruleset.classify_text(&case.reasoning, case.predicted);
        let entry = per_model.entry(&case.model).or_default();
        entry.0 += 1;
        for c in cats {
            *entry.1.entry(c).or_default() += 1;
        }
    }
    let mut dist = FailureDistribution {
        ruleset_version: ruleset.version().to_string(),
        models: Vec::new(),
        rows: Vec::new(),
        other: Vec::new(),
    };
    for (model, (n, cats)) in per_model {
        let row = |category| {
            let cases = cats.get(&category).copied().unwrap_or(0);
            FailureRow {
                model: model.clone(),
                category,
                cases,
                pct: 100.0 * cases as f64 / n as f64,
            }
        };
        dist.models.push(ModelErrorCount {
            model: model.clone(),
            errors: n,
        });
        dist.rows.extend(FailureCategory::RULED.map(row));
        dist.other.push(row(FailureCategory::Other));
    }
    dist
}
