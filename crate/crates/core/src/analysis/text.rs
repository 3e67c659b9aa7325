//! Word tokenization and whole-word phrase matching over reasoning traces.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;

/// A word is a run of letters or digits, optionally joined by internal
/// apostrophes or hyphens (`women's`, `gender-mainstreaming`).
static WORD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[\p{Alphabetic}\p{N}]+(?:['-][\p{Alphabetic}\p{N}]+)*").expect("word regex"));

/// Lowercased words of `text`. Typographic apostrophes count as `'`.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized = text.replace(['\u{2019}', '\u{2018}'], "'").to_lowercase();
    WORD.find_iter(&normalized).map(|m| m.as_str().to_string()).collect()
}

/// Multi-word phrase lookup keyed on the first word of each phrase.
#[derive(Debug, Clone, Default)]
pub struct PhraseIndex {
    by_first: HashMap<String, Vec<(Vec<String>, usize)>>,
}

impl PhraseIndex {
    /// Adds `phrase` as a spelling of entry `id`. Returns false if the
    /// phrase has no words.
    pub fn insert(&mut self, phrase: &str, id: usize) -> bool {
        let words = tokenize(phrase);
        let Some(first) = words.first().cloned() else {
            return false;
        };
        self.by_first.entry(first).or_default().push((words, id));
        true
    }

    /// Number of whole-word occurrences of each entry id in `words`.
    pub fn count(&self, words: &[String]) -> HashMap<usize, usize> {
        let mut hits = HashMap::new();
        for (i, w) in words.iter().enumerate() {
            for (phrase, id) in self.by_first.get(w).into_iter().flatten() {
                if words[i..].starts_with(phrase) {
                    *hits.entry(*id).or_insert(0) += 1;
                }
            }
        }
        hits
    }

    pub fn any(&self, words: &[String]) -> bool {
        !self.count(words).is_empty()
    }
}
