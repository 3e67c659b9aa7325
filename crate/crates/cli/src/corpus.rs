use std::path::Path;

use parlvote_core::corpus::{read_corpus_unchecked, validate_corpus, write_corpus, Corpus, LoadError};

use crate::{Failure, Outcome};

pub fn load_failure(e: LoadError) -> Failure {
    match e {
        LoadError::MissingFile(_) | LoadError::Io { .. } => Failure::Env(e.to_string()),
        _ => Failure::Data(e.to_string()),
    }
}

fn read_checked(dir: &Path) -> Result<Corpus, Failure> {
    let corpus = read_corpus_unchecked(dir).map_err(load_failure)?;
    let report = validate_corpus(&corpus);
    for v in &report.violations {
        println!("{v}");
    }
    if !report.is_empty() {
        return Err(Failure::Data(format!(
            "{} violation(s) in {}",
            report.violations.len(),
            dir.display()
        )));
    }
    Ok(corpus)
}

pub fn validate(dir: &Path) -> Outcome {
    let corpus = read_checked(dir)?;
    let n = corpus.counts();
    tracing::info!(
        groups = n.groups,
        meps = n.meps,
        debates = n.debates,
        speeches = n.speeches,
        roll_calls = n.roll_calls,
        "corpus is valid"
    );
    Ok(())
}

pub fn ingest(input: &Path, out: &Path) -> Outcome {
    let corpus = read_checked(input)?;
    write_corpus(&corpus, out).map_err(|e| Failure::Env(format!("cannot write {}: {e}", out.display())))?;
    let n = corpus.counts();
    tracing::info!(roll_calls = n.roll_calls, speeches = n.speeches, out = %out.display(), "corpus written");
    Ok(())
}
