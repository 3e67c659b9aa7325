use std::path::PathBuf;

use parlvote_core::analysis::{write_report, AnalysisReport, FailureRuleset, Lexicon};
use parlvote_core::store::{PredictionStore, StoreError};

use crate::{Failure, Outcome};

pub struct AnalyzeArgs {
    pub store: PathBuf,
    pub report: PathBuf,
    pub threshold: u8,
    pub stereotypes: Option<PathBuf>,
    pub topics: Option<PathBuf>,
    pub rules: Option<PathBuf>,
}

pub fn store_failure(e: StoreError) -> Failure {
    match e {
        StoreError::StorageFailure { .. } => Failure::Env(e.to_string()),
        _ => Failure::Data(e.to_string()),
    }
}

pub fn run(args: AnalyzeArgs) -> Outcome {
    if !args.store.is_file() {
        return Err(Failure::Env(format!("store {} does not exist", args.store.display())));
    }
    let env = |e: &dyn std::fmt::Display| Failure::Env(e.to_string());
    let stereotypes = match &args.stereotypes {
        Some(p) => Lexicon::from_file(p).map_err(|e| env(&e))?,
        None => Lexicon::default_stereotypes(),
    };
    let topics = match &args.topics {
        Some(p) => Lexicon::from_file(p).map_err(|e| env(&e))?,
        None => Lexicon::default_topics(),
    };
    let rules = match &args.rules {
        Some(p) => FailureRuleset::from_file(p).map_err(|e| env(&e))?,
        None => FailureRuleset::default_rules(),
    };
    let store = PredictionStore::open(&args.store).map_err(store_failure)?;
    let records = store.all();
    let report = AnalysisReport::build(&records, args.threshold, &stereotypes, &topics, &rules).map_err(|e| env(&e))?;
    let files = write_report(&report, &args.report)
        .map_err(|e| Failure::Env(format!("cannot write report to {}: {e}", args.report.display())))?;
    for f in &files {
        tracing::debug!(file = %f.display(), "wrote");
    }
    println!(
        "records={} threshold={} gender_errors={} vote_errors={} files={}",
        records.len(),
        report.threshold,
        report.gender_errors,
        report.vote_errors,
        files.len()
    );
    Ok(())
}
