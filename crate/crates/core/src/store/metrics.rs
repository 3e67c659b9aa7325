use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PredictionRecord;
use crate::aggregation::AgeBucket;
use crate::corpus::Gender;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Gender,
    PoliticalGroup,
    Country,
    #[serde(rename = "age")]
    AgeBucket,
    Model,
}

impl GroupBy {
    pub const ALL: [GroupBy; 5] = [
        GroupBy::Gender,
        GroupBy::PoliticalGroup,
        GroupBy::Country,
        GroupBy::AgeBucket,
        GroupBy::Model,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupBy::Gender => "gender",
            GroupBy::PoliticalGroup => "political_group",
            GroupBy::Country => "country",
            GroupBy::AgeBucket => "age",
            GroupBy::Model => "model",
        }
    }
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GroupBy::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown grouping `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub group: String,
    pub n: usize,
    pub n_correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub group_by: GroupBy,
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn total(&self) -> usize {
        self.rows.iter().map(|r| r.n).sum()
    }

    pub fn row(&self, group: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.group == group)
    }

    /// CSV with columns group, n, n_correct, accuracy (four decimals).
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["group", "n", "n_correct", "accuracy"]).expect("in-memory csv");
        for r in &self.rows {
            w.write_record([
                r.group.clone(),
                r.n.to_string(),
                r.n_correct.to_string(),
                format!("{:.4}", r.accuracy),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum GroupKey {
    Ordinal(u32, String),
    Bucket(AgeBucket),
    Label(String),
}

fn group_key(r: &PredictionRecord, by: GroupBy) -> GroupKey {
    match by {
        GroupBy::Gender => GroupKey::Label(r.speaker.gender.to_string()),
        GroupBy::PoliticalGroup => GroupKey::Ordinal(
            r.speaker.group_lr_ordinal.unwrap_or(u32::MAX),
            r.speaker.group_name.clone(),
        ),
        GroupBy::Country => GroupKey::Label(r.speaker.country.clone()),
        GroupBy::AgeBucket => GroupKey::Bucket(r.speaker.age_bucket),
        GroupBy::Model => GroupKey::Label(r.model.to_string()),
    }
}

/// Accuracy per subgroup. Political groups are ordered left to right, age
/// buckets youngest first, everything else alphabetically. Empty groups
/// never appear.
pub fn accuracy_breakdown(records: &[PredictionRecord], group_by: GroupBy) -> MetricsTable {
    let mut tally: BTreeMap<GroupKey, (usize, usize)> = BTreeMap::new();
    for r in records {
        let entry = tally.entry(group_key(r, group_by)).or_default();
        entry.0 += 1;
        entry.1 += usize::from(r.correct);
    }
    MetricsTable {
        group_by,
        rows: tally
            .into_iter()
            .map(|(key, (n, n_correct))| MetricsRow {
                group: match key {
                    GroupKey::Ordinal(_, name) | GroupKey::Label(name) => name,
                    GroupKey::Bucket(b) => b.label().to_string(),
                },
                n,
                n_correct,
                accuracy: n_correct as f64 / n as f64,
            })
            .collect(),
    }
}

/// Gender-task confusion counts, truth × predicted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub female_as_female: usize,
    pub female_as_male: usize,
    pub male_as_female: usize,
    pub male_as_male: usize,
}

impl ConfusionMatrix {
    pub fn cell(&self, truth: Gender, predicted: Gender) -> usize {
        match (truth, predicted) {
            (Gender::Female, Gender::Female) => self.female_as_female,
            (Gender::Female, Gender::Male) => self.female_as_male,
            (Gender::Male, Gender::Female) => self.male_as_female,
            (Gender::Male, Gender::Male) => self.male_as_male,
        }
    }

    pub fn row_total(&self, truth: Gender) -> usize {
        self.cell(truth, Gender::Female) + self.cell(truth, Gender::Male)
    }

    pub fn total(&self) -> usize {
        self.row_total(Gender::Female) + self.row_total(Gender::Male)
    }

    /// Share of true-`truth` speakers predicted as the other gender.
    pub fn misclassification_rate(&self, truth: Gender) -> Option<f64> {
        let row = self.row_total(truth);
        (row > 0).then(|| self.cell(truth, truth.flipped()) as f64 / row as f64)
    }

    pub fn to_csv(&self) -> String {
        format!(
            "truth,predicted_female,predicted_male\nFemale,{},{}\nMale,{},{}\n",
            self.female_as_female, self.female_as_male, self.male_as_female, self.male_as_male
        )
    }
}

/// Confusion counts over gender-task records; other records are ignored.
pub fn misclassification_matrix(records: &[PredictionRecord]) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::default();
    for r in records {
        let (Some(truth), Some(pred)) = (r.ground_truth.as_gender(), r.parsed.label.as_gender()) else {
            continue;
        };
        *match (truth, pred) {
            (Gender::Female, Gender::Female) => &mut m.female_as_female,
            (Gender::Female, Gender::Male) => &mut m.female_as_male,
            (Gender::Male, Gender::Female) => &mut m.male_as_female,
            (Gender::Male, Gender::Male) => &mut m.male_as_male,
        } += 1;
    }
    m
}
