use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use clap::Args;
use futures::stream::{self, StreamExt};
use parlvote_core::corpus::load_corpus;
use parlvote_core::gateway::{Attribute, ContextConfig, Gateway, GenerationParams, ModelId, RegistryConfig, TaskKind};
use parlvote_core::predict::{dispatch, model_specs, prepare, record_results, Prepared};
use parlvote_core::store::PredictionStore;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analyze::store_failure;
use crate::corpus::load_failure;
use crate::{parse_task, Failure, Outcome};

/// Speeches dispatched at once; providers still cap their own in-flight calls.
const SPEECHES_IN_FLIGHT: usize = 8;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// vote or gender
    #[arg(long, value_parser = parse_task)]
    task: TaskKind,
    /// Comma-separated `provider/model` ids.
    #[arg(long, value_delimiter = ',', required = true)]
    models: Vec<ModelId>,
    /// Comma-separated attributes to disclose (topic, gender, age, country,
    /// political_group), or `none` for speech only.
    #[arg(long, default_value = "none")]
    context: String,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    store: PathBuf,
    /// Provider registry TOML; the built-in stub models when omitted.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Evaluate at most this many speeches.
    #[arg(long)]
    limit: Option<usize>,
    /// With --limit, draw the speeches as a seeded sample instead of taking
    /// the first ones by id.
    #[arg(long)]
    seed: Option<u64>,
    /// Re-run pairs the store already holds.
    #[arg(long)]
    rerun: bool,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_output_tokens: Option<u32>,
}

pub fn parse_context(s: &str) -> Result<ContextConfig, String> {
    let s = s.trim();
    if s.is_empty() || s == "none" || s == "speech" {
        return Ok(ContextConfig::speech_only());
    }
    let attrs = s.split(',').map(str::parse).collect::<Result<Vec<Attribute>, _>>()?;
    Ok(ContextConfig::with(&attrs))
}

#[derive(Default)]
struct Tally {
    new: usize,
    skipped: usize,
    failed: usize,
}

pub async fn run(args: EvalArgs) -> Outcome {
    let usage = |m: String| Failure::Env(m);
    let config = parse_context(&args.context).map_err(usage)?;
    config.validate(args.task).map_err(|e| usage(e.to_string()))?;
    let mut params = GenerationParams::default();
    if let Some(t) = args.temperature {
        params.temperature = t;
    }
    if let Some(m) = args.max_output_tokens {
        params.max_output_tokens = m;
    }
    params.validate().map_err(usage)?;
    let mut models = args.models.clone();
    models.sort();
    models.dedup();

    let corpus = load_corpus(&args.corpus).map_err(load_failure)?;
    let registry = match &args.registry {
        Some(p) => RegistryConfig::from_file(p).map_err(|e| usage(e.to_string()))?,
        None => RegistryConfig::demo(),
    };
    let gateway = Gateway::from_config(&registry).map_err(|e| usage(e.to_string()))?;
    let specs = model_specs(&gateway, &models).map_err(|e| usage(e.to_string()))?;
    let store = PredictionStore::open(&args.store).map_err(store_failure)?;

    let mut speeches: Vec<&str> = corpus
        .speeches()
        .filter(|s| args.task == TaskKind::GenderPrediction || corpus.vote_for_speech(s).is_some())
        .map(|s| s.id.as_str())
        .collect();
    let ineligible = corpus.speeches().count() - speeches.len();
    if ineligible > 0 {
        tracing::info!(ineligible, "speeches without a recorded vote skipped");
    }
    if let Some(limit) = args.limit {
        match args.seed {
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                speeches = speeches.choose_multiple(&mut rng, limit).copied().collect();
                speeches.sort_unstable();
            }
            None => speeches.truncate(limit),
        }
    } else if args.seed.is_some() {
        tracing::warn!("--seed has no effect without --limit");
    }

    let done: HashSet<(String, ModelId, String)> = store
        .all()
        .into_iter()
        .map(|r| (r.speech_id, r.model, r.context_fingerprint.as_str().to_string()))
        .collect();

    let mut tallies: BTreeMap<ModelId, Tally> = models.iter().map(|m| (m.clone(), Tally::default())).collect();
    let mut fingerprints = HashSet::new();
    let mut jobs: Vec<(Prepared, Vec<_>)> = Vec::new();
    for id in &speeches {
        let prepared = prepare(&corpus, args.task, id, &config).map_err(|e| Failure::Data(e.to_string()))?;
        fingerprints.insert(prepared.fingerprint().as_str().to_string());
        let pending: Vec<_> = specs
            .iter()
            .filter(|s| {
                let key = (id.to_string(), s.id(), prepared.fingerprint().as_str().to_string());
                let skip = !args.rerun && done.contains(&key);
                if skip {
                    tallies.get_mut(&s.id()).expect("tally").skipped += 1;
                }
                !skip
            })
            .cloned()
            .collect();
        if !pending.is_empty() {
            jobs.push((prepared, pending));
        }
    }
    tracing::info!(
        speeches = speeches.len(),
        models = models.len(),
        pending_speeches = jobs.len(),
        "starting sweep"
    );

    let gateway = &gateway;
    let params = &params;
    let mut results = stream::iter(jobs.iter())
        .map(|(prepared, pending)| async move { (prepared, dispatch(gateway, prepared, pending, params).await) })
        .buffered(SPEECHES_IN_FLIGHT);
    while let Some((prepared, outcome)) = results.next().await {
        let mut outcome = outcome.map_err(|e| Failure::Env(e.to_string()))?;
        record_results(&corpus, &store, prepared, &mut outcome).map_err(|e| match e {
            parlvote_core::predict::PredictError::Store(s) => store_failure(s),
            other => Failure::Data(other.to_string()),
        })?;
        for r in &outcome {
            let tally = tallies.get_mut(&r.model).expect("tally");
            match &r.error {
                None => tally.new += 1,
                Some(e) => {
                    tally.failed += 1;
                    tracing::warn!(speech = %prepared.context.speech_id, model = %r.model, code = e.code(), "{e}");
                }
            }
        }
    }

    let sweep: Vec<_> = store
        .all()
        .into_iter()
        .filter(|r| r.task == args.task && fingerprints.contains(r.context_fingerprint.as_str()))
        .collect();
    for (model, t) in &tallies {
        let mine: Vec<_> = sweep.iter().filter(|r| &r.model == model).collect();
        let correct = mine.iter().filter(|r| r.correct).count();
        let accuracy = if mine.is_empty() {
            "n/a".to_string()
        } else {
            format!("{:.4}", correct as f64 / mine.len() as f64)
        };
        println!(
            "{model} new={} skipped={} failed={} records={} accuracy={accuracy}",
            t.new,
            t.skipped,
            t.failed,
            mine.len()
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_flags() {
        assert_eq!(parse_context("none").unwrap(), ContextConfig::speech_only());
        let c = parse_context("topic,group").unwrap();
        assert_eq!(c.included(), [Attribute::Topic, Attribute::PoliticalGroup]);
        assert!(parse_context("topic,zodiac").is_err());
    }
}
