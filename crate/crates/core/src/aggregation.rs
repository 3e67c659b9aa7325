//! Vote index search and demographic breakdowns of roll calls.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::corpus::{age_in_years, ChoiceCounts, Corpus, Mep, Outcome, RollCall};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotKey {
    #[default]
    PoliticalGroup,
    Country,
    Gender,
    #[serde(rename = "age")]
    AgeBucket,
}

impl PivotKey {
    pub const ALL: [PivotKey; 4] = [
        PivotKey::PoliticalGroup,
        PivotKey::Country,
        PivotKey::Gender,
        PivotKey::AgeBucket,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PivotKey::PoliticalGroup => "political_group",
            PivotKey::Country => "country",
            PivotKey::Gender => "gender",
            PivotKey::AgeBucket => "age",
        }
    }
}

impl FromStr for PivotKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PivotKey::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown pivot `{s}`"))
    }
}

/// Age band at a given date; lower bounds inclusive, upper bounds exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeBucket {
    Under40,
    From40To54,
    From55To64,
    Over64,
}

impl AgeBucket {
    pub fn from_age(years: u32) -> AgeBucket {
        match years {
            0..=39 => AgeBucket::Under40,
            40..=54 => AgeBucket::From40To54,
            55..=64 => AgeBucket::From55To64,
            _ => AgeBucket::Over64,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeBucket::Under40 => "<40",
            AgeBucket::From40To54 => "40-54",
            AgeBucket::From55To64 => "55-64",
            AgeBucket::Over64 => "65+",
        }
    }
}

impl fmt::Display for AgeBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AggregationError {
    #[error("unknown roll call `{0}`")]
    UnknownRollCall(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("mep `{mep_id}` is not yet born on {at}")]
    NegativeAge { mep_id: String, at: NaiveDate },
}

pub fn age_bucket_of(mep: &Mep, at_date: NaiveDate) -> Result<AgeBucket, AggregationError> {
    age_in_years(mep.birth_date, at_date)
        .map(AgeBucket::from_age)
        .ok_or_else(|| AggregationError::NegativeAge {
            mep_id: mep.id.clone(),
            at: at_date,
        })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub label: String,
    #[serde(flatten)]
    pub counts: ChoiceCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakdown {
    pub roll_call_id: String,
    pub pivot: PivotKey,
    pub rows: Vec<BreakdownRow>,
}

impl Breakdown {
    pub fn totals(&self) -> ChoiceCounts {
        let mut t = ChoiceCounts::default();
        for row in &self.rows {
            t.count_for += row.counts.count_for;
            t.count_against += row.counts.count_against;
            t.count_abstain += row.counts.count_abstain;
        }
        t
    }
}

/// Sort key for a breakdown row: group rows follow the left-right ordinal,
/// age rows follow the bucket order, everything else is alphabetical.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum RowKey {
    Ordinal(u32, String),
    Bucket(AgeBucket),
    Label(String),
}

impl RowKey {
    fn label(&self) -> String {
        match self {
            RowKey::Ordinal(_, name) | RowKey::Label(name) => name.clone(),
            RowKey::Bucket(b) => b.label().to_string(),
        }
    }
}

fn row_key(corpus: &Corpus, rc: &RollCall, mep: &Mep, pivot: PivotKey) -> RowKey {
    match pivot {
        PivotKey::PoliticalGroup => match corpus.group(&mep.group_id) {
            Some(g) => RowKey::Ordinal(g.lr_ordinal, g.name.clone()),
            None => RowKey::Ordinal(u32::MAX, mep.group_id.clone()),
        },
        PivotKey::Country => RowKey::Label(mep.country.clone()),
        PivotKey::Gender => RowKey::Label(mep.gender.to_string()),
        // validated corpora never have voters born after the vote
        PivotKey::AgeBucket => RowKey::Bucket(age_bucket_of(mep, rc.date).unwrap_or(AgeBucket::Under40)),
    }
}

pub fn vote_breakdown(
    corpus: &Corpus,
    roll_call_id: &str,
    pivot: PivotKey,
) -> Result<Breakdown, AggregationError> {
    let rc = corpus
        .roll_call(roll_call_id)
        .ok_or_else(|| AggregationError::UnknownRollCall(roll_call_id.to_string()))?;
    let mut rows: BTreeMap<RowKey, ChoiceCounts> = BTreeMap::new();
    for record in &rc.records {
        let Some(mep) = corpus.mep(&record.mep_id) else {
            continue;
        };
        rows.entry(row_key(corpus, rc, mep, pivot))
            .or_default()
            .add(record.choice);
    }
    Ok(Breakdown {
        roll_call_id: rc.id.clone(),
        pivot,
        rows: rows
            .into_iter()
            .map(|(key, counts)| BreakdownRow {
                label: key.label(),
                counts,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortKey {
    #[default]
    DateDesc,
    DateAsc,
    TitleAsc,
    ParticipantsDesc,
}

impl FromStr for SortKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "date_desc" => Ok(SortKey::DateDesc),
            "date_asc" => Ok(SortKey::DateAsc),
            "title_asc" => Ok(SortKey::TitleAsc),
            "participants_desc" => Ok(SortKey::ParticipantsDesc),
            _ => Err(format!("unknown sort key `{s}`")),
        }
    }
}

pub const MAX_PAGE_SIZE: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteIndexQuery {
    /// Case-insensitive substring matched against debate title and topic.
    pub text_query: Option<String>,
    pub year: Option<i32>,
    /// Exact (case-insensitive) debate topic.
    pub topic: Option<String>,
    pub sort: SortKey,
    pub page: usize,
    pub page_size: usize,
}

impl Default for VoteIndexQuery {
    fn default() -> Self {
        VoteIndexQuery {
            text_query: None,
            year: None,
            topic: None,
            sort: SortKey::default(),
            page: 0,
            page_size: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteSummary {
    pub id: String,
    pub title: String,
    pub date: NaiveDate,
    pub participant_count: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VotePage {
    pub items: Vec<VoteSummary>,
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
}

pub fn search_votes(corpus: &Corpus, query: &VoteIndexQuery) -> Result<VotePage, AggregationError> {
    if query.page_size == 0 || query.page_size > MAX_PAGE_SIZE {
        return Err(AggregationError::InvalidQuery(format!(
            "page_size must be within 1..={MAX_PAGE_SIZE}, got {}",
            query.page_size
        )));
    }
    let needle = query
        .text_query
        .as_deref()
        .map(str::trim)
        .filter(|q| !q.is_empty())
        .map(str::to_lowercase);
    let topic = query.topic.as_deref().map(str::to_lowercase);

    let mut hits: Vec<VoteSummary> = corpus
        .roll_calls()
        .filter_map(|rc| corpus.debate(&rc.debate_id).map(|d| (rc, d)))
        .filter(|(rc, d)| {
            let text_ok = needle.as_ref().is_none_or(|n| {
                d.title.to_lowercase().contains(n.as_str()) || d.topic.to_lowercase().contains(n.as_str())
            });
            let year_ok = query.year.is_none_or(|y| rc.date.year() == y);
            let topic_ok = topic.as_ref().is_none_or(|t| d.topic.to_lowercase() == *t);
            text_ok && year_ok && topic_ok
        })
        .map(|(rc, d)| VoteSummary {
            id: rc.id.clone(),
            title: d.title.clone(),
            date: rc.date,
            participant_count: rc.participant_count(),
            outcome: rc.outcome,
        })
        .collect();

    hits.sort_by(|a, b| {
        let primary = match query.sort {
            SortKey::DateDesc => b.date.cmp(&a.date),
            SortKey::DateAsc => a.date.cmp(&b.date),
            SortKey::TitleAsc => a.title.cmp(&b.title),
            SortKey::ParticipantsDesc => b.participant_count.cmp(&a.participant_count),
        };
        primary.then_with(|| a.id.cmp(&b.id))
    });

    let total = hits.len();
    let items = hits
        .into_iter()
        .skip(query.page.saturating_mul(query.page_size))
        .take(query.page_size)
        .collect();
    Ok(VotePage {
        items,
        total,
        page: query.page,
        page_size: query.page_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Gender, PoliticalGroup, VoteChoice, VoteRecord};

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn mep(id: &str, gender: Gender, birth: &str, country: &str, group: &str) -> Mep {
        Mep {
            id: id.into(),
            full_name: id.into(),
            gender,
            birth_date: date(birth),
            country: country.into(),
            group_id: group.into(),
        }
    }

    #[test]
    fn age_bucket_boundaries() {
        let a = mep("a", Gender::Male, "1985-06-01", "DE", "g");
        assert_eq!(age_bucket_of(&a, date("2024-05-31")), Ok(AgeBucket::Under40));
        let b = mep("b", Gender::Male, "1984-05-31", "DE", "g");
        assert_eq!(age_bucket_of(&b, date("2024-05-31")), Ok(AgeBucket::From40To54));
        assert_eq!(AgeBucket::from_age(54), AgeBucket::From40To54);
        assert_eq!(AgeBucket::from_age(55), AgeBucket::From55To64);
        assert_eq!(AgeBucket::from_age(64), AgeBucket::From55To64);
        assert_eq!(AgeBucket::from_age(65), AgeBucket::Over64);
        assert!(matches!(
            age_bucket_of(&a, date("1980-01-01")),
            Err(AggregationError::NegativeAge { .. })
        ));
    }

    #[test]
    fn group_rows_follow_left_right_order_not_alphabet() {
        let corpus = Corpus::from_parts(
            vec![
                PoliticalGroup { id: "r".into(), name: "Alpha Right".into(), lr_ordinal: 9 },
                PoliticalGroup { id: "l".into(), name: "Zeta Left".into(), lr_ordinal: 0 },
            ],
            vec![
                mep("m1", Gender::Male, "1970-01-01", "FR", "r"),
                mep("m2", Gender::Female, "1970-01-01", "FR", "l"),
            ],
            vec![],
            vec![],
            vec![RollCall {
                id: "rc".into(),
                debate_id: "d".into(),
                date: date("2024-01-01"),
                outcome: Outcome::Adopted,
                records: vec![
                    VoteRecord { mep_id: "m1".into(), choice: VoteChoice::For },
                    VoteRecord { mep_id: "m2".into(), choice: VoteChoice::Against },
                ],
            }],
        );
        let b = vote_breakdown(&corpus, "rc", PivotKey::PoliticalGroup).unwrap();
        let labels: Vec<_> = b.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["Zeta Left", "Alpha Right"]);
    }

    #[test]
    fn page_size_bounds() {
        let corpus = Corpus::default();
        for bad in [0, MAX_PAGE_SIZE + 1] {
            let q = VoteIndexQuery { page_size: bad, ..Default::default() };
            assert!(matches!(search_votes(&corpus, &q), Err(AggregationError::InvalidQuery(_))));
        }
        let q = VoteIndexQuery { page_size: MAX_PAGE_SIZE, ..Default::default() };
        assert_eq!(search_votes(&corpus, &q).unwrap().total, 0);
    }

    #[test]
    fn pivot_names_round_trip() {
        for p in PivotKey::ALL {
            assert_eq!(p.as_str().parse::<PivotKey>(), Ok(p));
            assert_eq!(serde_json::to_value(p).unwrap(), p.as_str());
        }
        assert!("zodiac".parse::<PivotKey>().is_err());
    }
}
