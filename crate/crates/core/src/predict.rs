//! One prediction round for one speech: resolve the context, build the
//! prompt, fan out to the requested models and record what parsed.

use chrono::Utc;
use serde::Serialize;

use crate::corpus::Corpus;
use crate::gateway::{
    build_prompt, resolve_context, ContextConfig, ContextError, ContextFingerprint, Gateway, GatewayError,
    GenerationParams, Label, ModelId, ModelSpec, ParsedPrediction, PredictionError, Prompt, ResolvedContext, TaskKind,
};
use crate::store::{NewPrediction, PredictionStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("speech `{0}` has no ground truth for this task")]
    NoGroundTruth(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Everything about a round that does not depend on the model.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub task: TaskKind,
    pub context: ResolvedContext,
    pub prompt: Prompt,
    pub ground_truth: Label,
    pub roll_call_id: Option<String>,
}

impl Prepared {
    pub fn fingerprint(&self) -> &ContextFingerprint {
        &self.prompt.context_fingerprint
    }
}

pub fn prepare(corpus: &Corpus, task: TaskKind, speech_id: &str, config: &ContextConfig) -> Result<Prepared, PredictError> {
    let context = resolve_context(corpus, speech_id, config, task)?;
    let speech = corpus.speech(speech_id).ok_or_else(|| ContextError::UnknownSpeech(speech_id.into()))?;
    let debate = corpus
        .debate(&speech.debate_id)
        .ok_or_else(|| PredictError::NoGroundTruth(speech_id.into()))?;
    let (ground_truth, roll_call_id) = match task {
        TaskKind::VotePrediction => {
            let (rc, choice) = corpus
                .vote_for_speech(speech)
                .ok_or_else(|| PredictError::NoGroundTruth(speech_id.into()))?;
            (Label::from(choice), Some(rc.id.clone()))
        }
        TaskKind::GenderPrediction => {
            let mep = corpus
                .mep(&speech.mep_id)
                .ok_or_else(|| PredictError::NoGroundTruth(speech_id.into()))?;
            (Label::from(mep.gender), None)
        }
    };
    let prompt = build_prompt(task, debate, speech, &context);
    Ok(Prepared {
        task,
        context,
        prompt,
        ground_truth,
        roll_call_id,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelResult {
    pub model: ModelId,
    pub record_id: Option<String>,
    pub prediction: Option<ParsedPrediction>,
    pub correct: Option<bool>,
    pub latency_ms: Option<u64>,
    pub attempts: Option<u32>,
    #[serde(skip)]
    pub error: Option<PredictionError>,
}

/// Resolves model ids against the gateway, failing on the first unknown one.
pub fn model_specs(gateway: &Gateway, models: &[ModelId]) -> Result<Vec<ModelSpec>, GatewayError> {
    models.iter().map(|m| gateway.model(m)).collect()
}

/// Dispatches the prepared prompt to every model without recording.
pub async fn dispatch(
    gateway: &Gateway,
    prepared: &Prepared,
    models: &[ModelSpec],
    params: &GenerationParams,
) -> Result<Vec<ModelResult>, PredictError> {
    params.validate().map_err(GatewayError::InvalidParams)?;
    let outcomes = gateway.compare_models(models, &prepared.prompt, params).await;
    Ok(outcomes
        .into_iter()
        .map(|o| {
            let (latency_ms, attempts) = o.raw.as_ref().map(|r| (r.latency_ms, r.attempts)).unzip();
            let (prediction, error) = match o.result {
                Ok(p) => (Some(p), None),
                Err(e) => (None, Some(e)),
            };
            ModelResult {
                model: o.model,
                record_id: None,
                correct: prediction.as_ref().map(|p| p.label == prepared.ground_truth),
                prediction,
                latency_ms,
                attempts,
                error,
            }
        })
        .collect())
}

/// Appends every parsed answer in `results`, in order, and fills in the
/// assigned record ids.
pub fn record_results(
    corpus: &Corpus,
    store: &PredictionStore,
    prepared: &Prepared,
    results: &mut [ModelResult],
) -> Result<(), PredictError> {
    for r in results.iter_mut() {
        let Some(parsed) = &r.prediction else { continue };
        let id = store.record(
            corpus,
            NewPrediction {
                task: prepared.task,
                speech_id: prepared.context.speech_id.clone(),
                roll_call_id: prepared.roll_call_id.clone(),
                model: r.model.clone(),
                context: prepared.context.clone(),
                context_fingerprint: prepared.fingerprint().clone(),
                parsed: parsed.clone(),
                created_at: Utc::now(),
            },
        )?;
        r.record_id = Some(id);
    }
    Ok(())
}

/// [`dispatch`], then [`record_results`] when a store is given. Every
/// parsed answer is durable before this returns.
pub async fn execute(
    corpus: &Corpus,
    gateway: &Gateway,
    store: Option<&PredictionStore>,
    prepared: &Prepared,
    models: &[ModelSpec],
    params: &GenerationParams,
) -> Result<Vec<ModelResult>, PredictError> {
    let mut results = dispatch(gateway, prepared, models, params).await?;
    if let Some(store) = store {
        record_results(corpus, store, prepared, &mut results)?;
    }
    Ok(results)
}
