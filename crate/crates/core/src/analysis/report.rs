use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{
    count_stereotype_terms, failure_distribution, high_confidence_errors, topic_gender_association, AnalysisError,
    CountMode, FailureDistribution, FailureRuleset, StereotypeLexicon, TermTable, TopicLexicon, TopicTable,
};
use crate::gateway::TaskKind;
use crate::store::{accuracy_breakdown, misclassification_matrix, ConfusionMatrix, GroupBy, MetricsTable, PredictionRecord};

/// Every table the `analyze` command exports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub threshold: u8,
    pub gender_errors: usize,
    pub vote_errors: usize,
    pub stereotypes: TermTable,
    pub topics: TopicTable,
    pub failures: FailureDistribution,
    pub gender_confusion: ConfusionMatrix,
    /// (task, table) for every task and grouping.
    pub accuracy: Vec<(TaskKind, MetricsTable)>,
}

pub type ReportFiles = Vec<PathBuf>;

impl AnalysisReport {
    pub fn build(
        records: &[PredictionRecord],
        threshold: u8,
        stereotypes: &StereotypeLexicon,
        topics: &TopicLexicon,
        ruleset: &FailureRuleset,
    ) -> Result<Self, AnalysisError> {
        let gender = high_confidence_errors(records, Some(TaskKind::GenderPrediction), threshold)?;
        let vote = high_confidence_errors(records, Some(TaskKind::VotePrediction), threshold)?;
        let accuracy = [TaskKind::VotePrediction, TaskKind::GenderPrediction]
            .into_iter()
            .flat_map(|task| {
                let scoped: Vec<PredictionRecord> = records.iter().filter(|r| r.task == task).cloned().collect();
                GroupBy::ALL.map(|g| (task, accuracy_breakdown(&scoped, g)))
            })
            .collect();
        Ok(AnalysisReport {
            threshold,
            gender_errors: gender.len(),
            vote_errors: vote.len(),
            stereotypes: count_stereotype_terms(&gender, stereotypes, CountMode::Case),
            topics: topic_gender_association(&gender, topics)?,
            failures: failure_distribution(&vote, ruleset),
            gender_confusion: misclassification_matrix(records),
            accuracy,
        })
    }

    /// (file name, contents) pairs in a fixed order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("stereotypes.csv".to_string(), self.stereotypes.to_csv()),
            ("topics.csv".to_string(), self.topics.to_csv()),
            ("failures.csv".to_string(), self.failures.to_csv()),
            ("failures_other.csv".to_string(), self.failures.other_to_csv()),
            ("gender_confusion.csv".to_string(), self.gender_confusion.to_csv()),
        ];
        for (task, table) in &self.accuracy {
            out.push((format!("accuracy_{task}_{}.csv", table.group_by), table.to_csv()));
        }
        out
    }
}

/// Writes every report file into `dir`, creating it if needed.
pub fn write_report(report: &AnalysisReport, dir: &Path) -> io::Result<ReportFiles> {
    std::fs::create_dir_all(dir)?;
    report
        .files()
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            Ok(path)
        })
        .collect()
}
