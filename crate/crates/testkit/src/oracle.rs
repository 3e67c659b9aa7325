use std::collections::BTreeMap;

use chrono::Datelike;
use parlvote_core::aggregation::{PivotKey, SortKey, VoteIndexQuery};
use parlvote_core::analysis::{ErrorCase, LexiconEntry};
use parlvote_core::corpus::{Corpus, Gender, VoteChoice};
use parlvote_core::gateway::{Label, TaskKind};
use parlvote_core::store::PredictionRecord;

/// (label, [for, against, abstain]) rows in display order.
pub type OracleRows = Vec<(String, [u32; 3])>;

fn choice_index(c: VoteChoice) -> usize {
    match c {
        VoteChoice::For => 0,
        VoteChoice::Against => 1,
        VoteChoice::Abstain => 2,
    }
}

fn age_label(birth: chrono::NaiveDate, at: chrono::NaiveDate) -> (u8, &'static str) {
    let mut years = at.year() - birth.year();
    if (at.month(), at.day()) < (birth.month(), birth.day()) {
        years -= 1;
    }
    if years < 40 {
        (0, "<40")
    } else if years < 55 {
        (1, "40-54")
    } else if years < 65 {
        (2, "55-64")
    } else {
        (3, "65+")
    }
}

/// Breakdown by brute force: tally each voter into its pivot cell, then
/// order cells by left-right ordinal, age band or label.
pub fn breakdown(corpus: &Corpus, roll_call_id: &str, pivot: PivotKey) -> OracleRows {
    let rc = corpus.roll_call(roll_call_id).expect("roll call exists");
    let mut cells: Vec<((u64, String), [u32; 3])> = Vec::new();
    for rec in &rc.records {
        let Some(m) = corpus.mep(&rec.mep_id) else { continue };
        let key: (u64, String) = match pivot {
            PivotKey::PoliticalGroup => {
                let g = corpus.groups().find(|g| g.id == m.group_id).expect("group exists");
                (g.lr_ordinal as u64, g.name.clone())
            }
            PivotKey::Country => (0, m.country.clone()),
            PivotKey::Gender => (
                0,
                match m.gender {
                    Gender::Male => "Male".to_string(),
                    Gender::Female => "Female".to_string(),
                },
            ),
            PivotKey::AgeBucket => {
                let (rank, label) = age_label(m.birth_date, rc.date);
                (rank as u64, label.to_string())
            }
        };
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, c)) => c[choice_index(rec.choice)] += 1,
            None => {
                let mut c = [0; 3];
                c[choice_index(rec.choice)] += 1;
                cells.push((key, c));
            }
        }
    }
    cells.sort_by(|a, b| a.0.cmp(&b.0));
    cells.into_iter().map(|((_, l), c)| (l, c)).collect()
}

/// Linear-scan search: (total, ids on the requested page).
pub fn search(corpus: &Corpus, q: &VoteIndexQuery) -> (usize, Vec<String>) {
    let needle = q.text_query.clone().unwrap_or_default().trim().to_lowercase();
    let mut hits = Vec::new();
    for rc in corpus.roll_calls() {
        let d = corpus.debate(&rc.debate_id).expect("debate exists");
        if !needle.is_empty() && !d.title.to_lowercase().contains(&needle) && !d.topic.to_lowercase().contains(&needle) {
            continue;
        }
        if q.year.is_some_and(|y| rc.date.year() != y) {
            continue;
        }
        if q.topic.as_ref().is_some_and(|t| t.to_lowercase() != d.topic.to_lowercase()) {
            continue;
        }
        hits.push((rc.id.clone(), rc.date, d.title.clone(), rc.records.len()));
    }
    // stable sorts applied from the weakest key to the strongest
    hits.sort_by(|a, b| a.0.cmp(&b.0));
    match q.sort {
        SortKey::DateDesc => hits.sort_by_key(|h| std::cmp::Reverse(h.1)),
        SortKey::DateAsc => hits.sort_by_key(|a| a.1),
        SortKey::TitleAsc => hits.sort_by(|a, b| a.2.cmp(&b.2)),
        SortKey::ParticipantsDesc => hits.sort_by_key(|h| std::cmp::Reverse(h.3)),
    }
    let total = hits.len();
    let ids = hits
        .into_iter()
        .map(|h| h.0)
        .skip(q.page * q.page_size)
        .take(q.page_size)
        .collect();
    (total, ids)
}

/// Ids of records with `correct == false` and confidence ≥ `threshold`.
pub fn high_confidence_error_ids(records: &[PredictionRecord], task: Option<TaskKind>, threshold: u8) -> Vec<String> {
    let mut out = Vec::new();
    for r in records {
        if task.is_some_and(|t| t != r.task) {
            continue;
        }
        if r.parsed.label != r.ground_truth && r.parsed.confidence >= threshold {
            out.push(r.record_id.clone());
        }
    }
    out
}

/// Splits text into lowercase words by walking characters: letters and
/// digits build a word; a single `'` or `-` between two word characters
/// stays inside it.
pub fn token_walk(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().map(|c| if c == '\u{2019}' || c == '\u{2018}' { '\'' } else { c }).collect();
    let is_word = |c: char| c.is_alphabetic() || c.is_numeric();
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_word(c) {
            cur.extend(c.to_lowercase());
        } else if (c == '\'' || c == '-') && !cur.is_empty() && chars.get(i + 1).is_some_and(|&n| is_word(n)) {
            cur.push(c);
        } else if !cur.is_empty() {
            words.push(std::mem::take(&mut cur));
        }
        i += 1;
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words
}

fn phrase_hits(words: &[String], phrase: &[String]) -> usize {
    if phrase.is_empty() || phrase.len() > words.len() {
        return 0;
    }
    (0..=words.len() - phrase.len())
        .filter(|&i| (0..phrase.len()).all(|k| words[i + k] == phrase[k]))
        .count()
}

fn spellings(entry: &LexiconEntry) -> Vec<Vec<String>> {
    std::iter::once(&entry.term)
        .chain(&entry.variants)
        .map(|s| token_walk(s))
        .collect()
}

/// Term table by naive window scan: (term, gender, occurrences), sorted by
/// occurrences desc then term, zero rows dropped.
pub fn term_counts(traces: &[String], entries: &[LexiconEntry], per_mention: bool) -> Vec<(String, Gender, usize)> {
    let mut rows = Vec::new();
    for e in entries {
        let forms = spellings(e);
        let mut n = 0;
        for t in traces {
            let words = token_walk(t);
            let hits: usize = forms.iter().map(|f| phrase_hits(&words, f)).sum();
            n += if per_mention { hits } else { usize::from(hits > 0) };
        }
        if n > 0 {
            rows.push((e.term.clone(), e.gender, n));
        }
    }
    rows.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
    rows
}

/// Topic table by naive scan: (keyword, gender, male_pred, female_pred, total).
pub fn topic_counts(cases: &[ErrorCase], entries: &[LexiconEntry]) -> Vec<(String, Gender, usize, usize, usize)> {
    let mut rows = Vec::new();
    for e in entries {
        let forms = spellings(e);
        let (mut m, mut f) = (0, 0);
        for c in cases {
            let words = token_walk(&c.reasoning);
            if forms.iter().any(|form| phrase_hits(&words, form) > 0) {
                match c.predicted {
                    Label::Male => m += 1,
                    Label::Female => f += 1,
                    _ => panic!("topic oracle takes gender cases"),
                }
            }
        }
        if m + f > 0 {
            rows.push((e.term.clone(), e.gender, m, f, m + f));
        }
    }
    rows.sort_by(|a, b| b.4.cmp(&a.4).then(a.0.cmp(&b.0)));
    rows
}

/// n per group label, for conservation checks.
pub fn group_sizes<K: Ord>(items: impl IntoIterator<Item = K>) -> BTreeMap<K, usize> {
    let mut m = BTreeMap::new();
    for k in items {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}
