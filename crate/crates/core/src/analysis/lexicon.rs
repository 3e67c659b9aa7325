use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::text::{tokenize, PhraseIndex};
use crate::corpus::Gender;

const DEFAULT_STEREOTYPES: &str = include_str!("../../data/stereotype_lexicon.tsv");
const DEFAULT_TOPICS: &str = include_str!("../../data/topic_lexicon.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    /// Canonical spelling, lowercased. This is what tables report.
    pub term: String,
    pub gender: Gender,
    /// Extra spellings counted as this term (inflections, spacing variants).
    pub variants: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("lexicon has no entries")]
    Empty,
    #[error("`{0}` is listed under more than one term")]
    Duplicate(String),
}

/// Term → gender map used to mine reasoning traces. Both the stereotype
/// cue list and the topic keyword list use this type.
///
/// File format: one `term<TAB>gender[<TAB>variant,variant,...]` per line;
/// blank lines and `#` comments are skipped.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: PhraseIndex,
}

pub type StereotypeLexicon = Lexicon;
pub type TopicLexicon = Lexicon;

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self, LexiconError> {
        if entries.is_empty() {
            return Err(LexiconError::Empty);
        }
        let mut seen: HashMap<Vec<String>, usize> = HashMap::new();
        let mut index = PhraseIndex::default();
        let mut normalized = Vec::with_capacity(entries.len());
        for (id, mut e) in entries.into_iter().enumerate() {
            e.term = tokenize(&e.term).join(" ");
            if e.term.is_empty() {
                return Err(LexiconError::Malformed {
                    line: id + 1,
                    reason: "term has no words".into(),
                });
            }
            for spelling in std::iter::once(&e.term).chain(&e.variants) {
                let key = tokenize(spelling);
                if key.is_empty() {
                    continue;
                }
                if seen.insert(key, id).is_some_and(|prev| prev != id) {
                    return Err(LexiconError::Duplicate(spelling.clone()));
                }
                index.insert(spelling, id);
            }
            normalized.push(e);
        }
        Ok(Lexicon {
            entries: normalized,
            index,
        })
    }

    pub fn from_tsv(text: &str) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let malformed = |reason: String| LexiconError::Malformed { line: i + 1, reason };
            let mut cols = line.split('\t');
            let term = cols.next().unwrap_or_default().trim();
            let gender = cols
                .next()
                .ok_or_else(|| malformed("expected term<TAB>gender".into()))?
                .trim();
            let gender: Gender = gender.parse().map_err(|_| malformed(format!("unknown gender `{gender}`")))?;
            let variants = cols
                .next()
                .map(|v| {
                    v.split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect()
                })
                .unwrap_or_default();
            if cols.next().is_some() {
                return Err(malformed("too many columns".into()));
            }
            entries.push(LexiconEntry {
                term: term.to_string(),
                gender,
                variants,
            });
        }
        Lexicon::new(entries)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_tsv(&text)
    }

    /// The stereotypical cue terms with their assumed genders.
    pub fn default_stereotypes() -> Self {
        Self::from_tsv(DEFAULT_STEREOTYPES).expect("bundled stereotype lexicon is valid")
    }

    /// The topic keywords with their stereotype genders.
    pub fn default_topics() -> Self {
        Self::from_tsv(DEFAULT_TOPICS).expect("bundled topic lexicon is valid")
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    /// Mentions per entry index in `words`, entries with no mention absent.
    pub(crate) fn mentions(&self, words: &[String]) -> HashMap<usize, usize> {
        self.index.count(words)
    }

    /// term → gender, for display.
    pub fn as_map(&self) -> BTreeMap<&str, Gender> {
        self.entries.iter().map(|e| (e.term.as_str(), e.gender)).collect()
    }
}
