//! The linked parliamentary dataset: political groups, MEPs, debates,
//! speeches and roll-call votes.
//!
//! A [`Corpus`] is built once (see [`load_corpus`]) and never mutated
//! afterwards. Every collection is keyed by id in a `BTreeMap` so iteration
//! order is stable.

mod load;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use load::{load_corpus, read_corpus_unchecked, write_corpus, LoadError, CORPUS_FILES};
pub use validate::{validate_corpus, RecordKind, Rule, ValidationReport, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoliticalGroup {
    pub id: String,
    pub name: String,
    /// Position on the left-right spectrum; 0 is furthest left.
    pub lr_ordinal: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "Male",
            Gender::Female => "Female",
        }
    }

    pub fn flipped(self) -> Gender {
        match self {
            Gender::Male => Gender::Female,
            Gender::Female => Gender::Male,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            other => Err(format!("unknown gender `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mep {
    pub id: String,
    pub full_name: String,
    pub gender: Gender,
    pub birth_date: NaiveDate,
    /// ISO-3166 alpha-2.
    pub country: String,
    pub group_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Debate {
    pub id: String,
    pub title: String,
    pub topic: String,
    pub date: NaiveDate,
    pub report_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Speech {
    pub id: String,
    pub debate_id: String,
    pub mep_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Adopted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VoteChoice {
    For,
    Against,
    Abstain,
}

impl VoteChoice {
    pub const ALL: [VoteChoice; 3] = [VoteChoice::For, VoteChoice::Against, VoteChoice::Abstain];

    pub fn as_str(self) -> &'static str {
        match self {
            VoteChoice::For => "For",
            VoteChoice::Against => "Against",
            VoteChoice::Abstain => "Abstain",
        }
    }
}

impl fmt::Display for VoteChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub mep_id: String,
    pub choice: VoteChoice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollCall {
    pub id: String,
    pub debate_id: String,
    pub date: NaiveDate,
    pub outcome: Outcome,
    pub records: Vec<VoteRecord>,
}

/// Per-choice tallies of a roll call or a breakdown row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceCounts {
    pub count_for: u32,
    pub count_against: u32,
    pub count_abstain: u32,
}

impl ChoiceCounts {
    pub fn add(&mut self, choice: VoteChoice) {
        match choice {
            VoteChoice::For => self.count_for += 1,
            VoteChoice::Against => self.count_against += 1,
            VoteChoice::Abstain => self.count_abstain += 1,
        }
    }

    pub fn total(&self) -> u32 {
        self.count_for + self.count_against + self.count_abstain
    }
}

impl RollCall {
    pub fn participant_count(&self) -> usize {
        self.records.len()
    }

    pub fn totals(&self) -> ChoiceCounts {
        let mut counts = ChoiceCounts::default();
        for record in &self.records {
            counts.add(record.choice);
        }
        counts
    }

    pub fn choice_of(&self, mep_id: &str) -> Option<VoteChoice> {
        self.records
            .iter()
            .find(|r| r.mep_id == mep_id)
            .map(|r| r.choice)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub(crate) debates: BTreeMap<String, Debate>,
    pub(crate) speeches: BTreeMap<String, Speech>,
    pub(crate) meps: BTreeMap<String, Mep>,
    pub(crate) groups: BTreeMap<String, PoliticalGroup>,
    pub(crate) roll_calls: BTreeMap<String, RollCall>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("unknown debate `{0}`")]
    UnknownDebate(String),
    #[error("unknown speech `{0}`")]
    UnknownSpeech(String),
    #[error("unknown roll call `{0}`")]
    UnknownRollCall(String),
}

impl Corpus {
    /// Assembles a corpus from raw records without checking any invariant.
    /// Later records with a duplicate id replace earlier ones; use
    /// [`validate_corpus`] to audit the result.
    pub fn from_parts(
        groups: Vec<PoliticalGroup>,
        meps: Vec<Mep>,
        debates: Vec<Debate>,
        speeches: Vec<Speech>,
        roll_calls: Vec<RollCall>,
    ) -> Self {
        Corpus {
            groups: groups.into_iter().map(|g| (g.id.clone(), g)).collect(),
            meps: meps.into_iter().map(|m| (m.id.clone(), m)).collect(),
            debates: debates.into_iter().map(|d| (d.id.clone(), d)).collect(),
            speeches: speeches.into_iter().map(|s| (s.id.clone(), s)).collect(),
            roll_calls: roll_calls.into_iter().map(|r| (r.id.clone(), r)).collect(),
        }
    }

    pub fn debates(&self) -> impl Iterator<Item = &Debate> {
        self.debates.values()
    }

    pub fn speeches(&self) -> impl Iterator<Item = &Speech> {
        self.speeches.values()
    }

    pub fn meps(&self) -> impl Iterator<Item = &Mep> {
        self.meps.values()
    }

    pub fn groups(&self) -> impl Iterator<Item = &PoliticalGroup> {
        self.groups.values()
    }

    pub fn roll_calls(&self) -> impl Iterator<Item = &RollCall> {
        self.roll_calls.values()
    }

    pub fn debate(&self, id: &str) -> Option<&Debate> {
        self.debates.get(id)
    }

    pub fn speech(&self, id: &str) -> Option<&Speech> {
        self.speeches.get(id)
    }

    pub fn mep(&self, id: &str) -> Option<&Mep> {
        self.meps.get(id)
    }

    pub fn group(&self, id: &str) -> Option<&PoliticalGroup> {
        self.groups.get(id)
    }

    pub fn roll_call(&self, id: &str) -> Option<&RollCall> {
        self.roll_calls.get(id)
    }

    pub fn counts(&self) -> CorpusCounts {
        CorpusCounts {
            groups: self.groups.len(),
            meps: self.meps.len(),
            debates: self.debates.len(),
            speeches: self.speeches.len(),
            roll_calls: self.roll_calls.len(),
        }
    }

    /// Speeches of one debate joined to their speaker, ordered by speech id.
    pub fn speeches_for_debate(&self, debate_id: &str) -> Result<Vec<(&Speech, &Mep)>, CorpusError> {
        if !self.debates.contains_key(debate_id) {
            return Err(CorpusError::UnknownDebate(debate_id.to_string()));
        }
        Ok(self
            .speeches
            .values()
            .filter(|s| s.debate_id == debate_id)
            .filter_map(|s| self.meps.get(&s.mep_id).map(|m| (s, m)))
            .collect())
    }

    /// Roll calls held on a debate, ordered by (date, id).
    pub fn roll_calls_for_debate(&self, debate_id: &str) -> Vec<&RollCall> {
        let mut calls: Vec<&RollCall> = self
            .roll_calls
            .values()
            .filter(|r| r.debate_id == debate_id)
            .collect();
        calls.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.id.cmp(&b.id)));
        calls
    }

    /// The earliest roll call of the speech's debate in which the speaker
    /// cast a vote, together with that vote.
    pub fn vote_for_speech(&self, speech: &Speech) -> Option<(&RollCall, VoteChoice)> {
        self.roll_calls_for_debate(&speech.debate_id)
            .into_iter()
            .find_map(|rc| rc.choice_of(&speech.mep_id).map(|c| (rc, c)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusCounts {
    pub groups: usize,
    pub meps: usize,
    pub debates: usize,
    pub speeches: usize,
    pub roll_calls: usize,
}

/// Whole years elapsed between `birth` and `at`, or `None` when `at`
/// precedes `birth`.
pub fn age_in_years(birth: NaiveDate, at: NaiveDate) -> Option<u32> {
    use chrono::Datelike;
    if at < birth {
        return None;
    }
    let mut years = at.year() - birth.year();
    if (at.month(), at.day()) < (birth.month(), birth.day()) {
        years -= 1;
    }
    Some(years as u32)
}
