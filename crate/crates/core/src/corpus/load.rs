use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::validate::{validate_corpus, Rule, ValidationReport};
use super::Corpus;

/// File names (inside the corpus directory) of the five record kinds.
pub const CORPUS_FILES: [&str; 5] = [
    "groups.jsonl",
    "meps.jsonl",
    "debates.jsonl",
    "speeches.jsonl",
    "roll_calls.jsonl",
];

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("missing corpus file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: malformed record: {reason}")]
    MalformedRecord {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("record `{record_id}` references missing `{target}`")]
    DanglingReference { record_id: String, target: String },
    #[error("corpus violates {} invariant(s)", .0.violations.len())]
    Invalid(ValidationReport),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn read_records<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<Vec<T>, LoadError> {
    let path = dir.join(name);
    let file = match fs::File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(LoadError::MissingFile(path)),
        Err(source) => return Err(LoadError::Io { path, source }),
    };
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| LoadError::MalformedRecord {
            file: name.to_string(),
            line: idx + 1,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| LoadError::MalformedRecord {
            file: name.to_string(),
            line: idx + 1,
            reason: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Parses the five record files without enforcing corpus invariants.
pub fn read_corpus_unchecked(dir: impl AsRef<Path>) -> Result<Corpus, LoadError> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(LoadError::MissingFile(dir.to_path_buf()));
    }
    for name in CORPUS_FILES {
        if !dir.join(name).is_file() {
            return Err(LoadError::MissingFile(dir.join(name)));
        }
    }
    Ok(Corpus::from_parts(
        read_records(dir, CORPUS_FILES[0])?,
        read_records(dir, CORPUS_FILES[1])?,
        read_records(dir, CORPUS_FILES[2])?,
        read_records(dir, CORPUS_FILES[3])?,
        read_records(dir, CORPUS_FILES[4])?,
    ))
}

/// Loads a corpus directory and rejects it unless every invariant holds.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Corpus, LoadError> {
    let corpus = read_corpus_unchecked(dir)?;
    let report = validate_corpus(&corpus);
    if report.is_empty() {
        return Ok(corpus);
    }
    if let Some(v) = report.violations.iter().find(|v| v.rule == Rule::DanglingReference) {
        return Err(LoadError::DanglingReference {
            record_id: v.record_id.clone(),
            target: v.detail.clone(),
        });
    }
    Err(LoadError::Invalid(report))
}

fn write_records<'a, T: Serialize + 'a>(
    dir: &Path,
    name: &str,
    records: impl Iterator<Item = &'a T>,
) -> io::Result<()> {
    let mut out = BufWriter::new(fs::File::create(dir.join(name))?);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Writes the corpus in the same line-delimited layout [`load_corpus`] reads.
pub fn write_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> io::Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_records(dir, CORPUS_FILES[0], corpus.groups.values())?;
    write_records(dir, CORPUS_FILES[1], corpus.meps.values())?;
    write_records(dir, CORPUS_FILES[2], corpus.debates.values())?;
    write_records(dir, CORPUS_FILES[3], corpus.speeches.values())?;
    write_records(dir, CORPUS_FILES[4], corpus.roll_calls.values())
}
