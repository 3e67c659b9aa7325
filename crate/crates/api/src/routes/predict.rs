use std::collections::BTreeMap;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::Json;
use parlvote_core::gateway::{
    Attribute, ContextConfig, GenerationParams, Label, ModelId, ParsedPrediction, ResolvedContext, TaskKind,
};
use parlvote_core::predict::{execute, model_specs, prepare, ModelResult, PredictError, Prepared};
use parlvote_core::store::PredictionStore;
use serde::{Deserialize, Serialize};

use crate::error::batch_error;
use crate::{ApiError, AppState};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub task: TaskKind,
    pub speech_id: String,
    #[serde(default)]
    pub context_config: ContextConfig,
    pub models: Vec<ModelId>,
    #[serde(default)]
    pub params: Option<GenerationParams>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterfactualRequest {
    pub task: TaskKind,
    pub speech_id: String,
    #[serde(default)]
    pub base_config: ContextConfig,
    pub overrides: BTreeMap<Attribute, String>,
    pub models: Vec<ModelId>,
    #[serde(default)]
    pub params: Option<GenerationParams>,
}

/// One model's answer, or the error it failed with.
#[derive(Debug, Clone, Serialize)]
pub struct ModelEntry {
    pub model: ModelId,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<ParsedPrediction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
}

impl From<ModelResult> for ModelEntry {
    fn from(r: ModelResult) -> Self {
        ModelEntry {
            model: r.model,
            status: if r.error.is_some() { "error" } else { "ok" },
            record_id: r.record_id,
            prediction: r.prediction,
            correct: r.correct,
            latency_ms: r.latency_ms,
            attempts: r.attempts,
            error: r.error.as_ref().map(batch_error),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictResponse {
    pub task: TaskKind,
    pub speech_id: String,
    pub roll_call_id: Option<String>,
    pub ground_truth: Label,
    pub context_fingerprint: String,
    pub context: ResolvedContext,
    pub results: Vec<ModelEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Run {
    pub context_fingerprint: String,
    pub context: ResolvedContext,
    pub results: Vec<ModelEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffEntry {
    pub attribute: Attribute,
    pub base: Option<String>,
    pub counterfactual: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelChange {
    pub model: ModelId,
    pub base: Label,
    pub counterfactual: Label,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterfactualResponse {
    pub task: TaskKind,
    pub speech_id: String,
    pub roll_call_id: Option<String>,
    pub ground_truth: Label,
    pub base: Run,
    pub counterfactual: Run,
    pub diff: Vec<DiffEntry>,
    /// Models whose label differs between the two runs.
    pub label_changes: Vec<LabelChange>,
}

fn check_models(models: &[ModelId]) -> Result<(), ApiError> {
    if models.is_empty() {
        return Err(ApiError::bad_request("invalid_request", "at least one model is required"));
    }
    Ok(())
}

async fn run(
    state: &AppState,
    store: Option<&PredictionStore>,
    prepared: &Prepared,
    models: &[ModelId],
    params: &GenerationParams,
) -> Result<Vec<ModelEntry>, ApiError> {
    let specs = model_specs(state.gateway(), models).map_err(PredictError::from)?;
    let results = execute(state.corpus(), state.gateway(), store, prepared, &specs, params).await?;
    Ok(results.into_iter().map(ModelEntry::from).collect())
}

fn deadline_exceeded(state: &AppState) -> ApiError {
    ApiError::new(
        StatusCode::GATEWAY_TIMEOUT,
        "deadline_exceeded",
        format!("request did not finish within {} s", state.deadline().as_secs_f64()),
    )
}

pub async fn predict(
    State(state): State<AppState>,
    body: Result<Json<PredictRequest>, JsonRejection>,
) -> Result<Json<PredictResponse>, ApiError> {
    let Json(req) = body?;
    check_models(&req.models)?;
    let params = req.params.unwrap_or_default();
    let prepared = prepare(state.corpus(), req.task, &req.speech_id, &req.context_config)?;
    let results = tokio::time::timeout(
        state.deadline(),
        run(&state, Some(state.store()), &prepared, &req.models, &params),
    )
    .await
    .map_err(|_| deadline_exceeded(&state))??;
    Ok(Json(PredictResponse {
        task: req.task,
        speech_id: req.speech_id,
        roll_call_id: prepared.roll_call_id.clone(),
        ground_truth: prepared.ground_truth,
        context_fingerprint: prepared.fingerprint().to_string(),
        context: prepared.context,
        results,
    }))
}

pub async fn counterfactual(
    State(state): State<AppState>,
    body: Result<Json<CounterfactualRequest>, JsonRejection>,
) -> Result<Json<CounterfactualResponse>, ApiError> {
    let Json(req) = body?;
    check_models(&req.models)?;
    if req.overrides.is_empty() {
        return Err(ApiError::bad_request(
            "invalid_request",
            "a counterfactual needs at least one override",
        ));
    }
    let params = req.params.unwrap_or_default();
    let mut cf_config = req.base_config.clone();
    cf_config.overrides.extend(req.overrides.clone());
    let base = prepare(state.corpus(), req.task, &req.speech_id, &req.base_config)?;
    let cf = prepare(state.corpus(), req.task, &req.speech_id, &cf_config)?;

    let both = async {
        let b = run(&state, None, &base, &req.models, &params).await?;
        let c = run(&state, None, &cf, &req.models, &params).await?;
        Ok::<_, ApiError>((b, c))
    };
    let (base_results, cf_results) = tokio::time::timeout(state.deadline(), both)
        .await
        .map_err(|_| deadline_exceeded(&state))??;

    let diff = base
        .context
        .diff(&cf.context)
        .into_iter()
        .map(|(attribute, base, counterfactual)| DiffEntry {
            attribute,
            base,
            counterfactual,
        })
        .collect();
    let label_changes = base_results
        .iter()
        .zip(&cf_results)
        .filter_map(|(b, c)| {
            let (bl, cl) = (b.prediction.as_ref()?.label, c.prediction.as_ref()?.label);
            (bl != cl).then(|| LabelChange {
                model: b.model.clone(),
                base: bl,
                counterfactual: cl,
            })
        })
        .collect();

    Ok(Json(CounterfactualResponse {
        task: req.task,
        speech_id: req.speech_id,
        roll_call_id: base.roll_call_id.clone(),
        ground_truth: base.ground_truth,
        base: Run {
            context_fingerprint: base.fingerprint().to_string(),
            context: base.context,
            results: base_results,
        },
        counterfactual: Run {
            context_fingerprint: cf.fingerprint().to_string(),
            context: cf.context,
            results: cf_results,
        },
        diff,
        label_changes,
    }))
}
