use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Group,
    Mep,
    Debate,
    Speech,
    RollCall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    DanglingReference,
    DuplicateLrOrdinal,
    DuplicateVoteRecord,
    EmptySpeech,
    BirthAfterVote,
}

impl Rule {
    fn as_str(self) -> &'static str {
        match self {
            Rule::DanglingReference => "dangling_reference",
            Rule::DuplicateLrOrdinal => "duplicate_lr_ordinal",
            Rule::DuplicateVoteRecord => "duplicate_vote_record",
            Rule::EmptySpeech => "empty_speech",
            Rule::BirthAfterVote => "birth_after_vote",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: RecordKind,
    pub record_id: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = serde_json::to_value(self.kind).ok();
        let kind = kind.as_ref().and_then(|v| v.as_str()).unwrap_or("?");
        write!(f, "{kind} {} {}: {}", self.record_id, self.rule.as_str(), self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, kind: RecordKind, record_id: &str, rule: Rule, detail: String) {
        self.0.push(Violation {
            kind,
            record_id: record_id.to_string(),
            rule,
            detail,
        });
    }
}

/// Checks every corpus invariant and lists the violations, ordered by
/// record kind then record id.
pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    let mut out = Collector(Vec::new());

    let mut by_ordinal: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for g in corpus.groups.values() {
        by_ordinal.entry(g.lr_ordinal).or_default().push(&g.id);
    }
    for ids in by_ordinal.values().filter(|ids| ids.len() > 1) {
        for id in &ids[1..] {
            out.push(
                RecordKind::Group,
                id,
                Rule::DuplicateLrOrdinal,
                format!("lr_ordinal shared with group {}", ids[0]),
            );
        }
    }

    for m in corpus.meps.values() {
        if !corpus.groups.contains_key(&m.group_id) {
            out.push(RecordKind::Mep, &m.id, Rule::DanglingReference, format!("group {}", m.group_id));
        }
    }

    for s in corpus.speeches.values() {
        if !corpus.debates.contains_key(&s.debate_id) {
            out.push(RecordKind::Speech, &s.id, Rule::DanglingReference, format!("debate {}", s.debate_id));
        }
        if !corpus.meps.contains_key(&s.mep_id) {
            out.push(RecordKind::Speech, &s.id, Rule::DanglingReference, format!("mep {}", s.mep_id));
        }
        if s.text.trim().is_empty() {
            out.push(RecordKind::Speech, &s.id, Rule::EmptySpeech, "speech text is blank".into());
        }
    }

    for rc in corpus.roll_calls.values() {
        if !corpus.debates.contains_key(&rc.debate_id) {
            out.push(RecordKind::RollCall, &rc.id, Rule::DanglingReference, format!("debate {}", rc.debate_id));
        }
        let mut seen = BTreeSet::new();
        for rec in &rc.records {
            match corpus.meps.get(&rec.mep_id) {
                None => out.push(
                    RecordKind::RollCall,
                    &rc.id,
                    Rule::DanglingReference,
                    format!("mep {}", rec.mep_id),
                ),
                Some(mep) if mep.birth_date >= rc.date => out.push(
                    RecordKind::RollCall,
                    &rc.id,
                    Rule::BirthAfterVote,
                    format!("mep {} born {} on or after vote date {}", mep.id, mep.birth_date, rc.date),
                ),
                Some(_) => {}
            }
            if !seen.insert(rec.mep_id.as_str()) {
                out.push(
                    RecordKind::RollCall,
                    &rc.id,
                    Rule::DuplicateVoteRecord,
                    format!("mep {} has more than one vote record", rec.mep_id),
                );
            }
        }
    }

    let mut violations = out.0;
    violations.sort_by(|a, b| a.kind.cmp(&b.kind).then_with(|| a.record_id.cmp(&b.record_id)));
    ValidationReport { violations }
}
