use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::Json;
use parlvote_core::analysis::{
    count_stereotype_terms, failure_distribution, high_confidence_errors, topic_gender_association, CountMode,
    ErrorCase, FailureDistribution, TermTable, TopicTable, DEFAULT_CONFIDENCE_THRESHOLD,
};
use parlvote_core::gateway::{ModelId, TaskKind};
use parlvote_core::store::{GroupBy, MetricsTable, RecordFilter};
use serde::Deserialize;

use crate::{ApiError, AppState};

#[derive(Debug, Deserialize)]
pub struct AccuracyParams {
    task: Option<String>,
    group_by: Option<String>,
    model: Option<String>,
    confidence_min: Option<u8>,
}

pub async fn accuracy(
    State(state): State<AppState>,
    params: Result<Query<AccuracyParams>, QueryRejection>,
) -> Result<Json<MetricsTable>, ApiError> {
    let Query(p) = params?;
    let group_by: GroupBy = p
        .group_by
        .as_deref()
        .ok_or_else(|| ApiError::bad_request("invalid_grouping", "group_by is required"))?
        .parse()
        .map_err(|e: String| ApiError::bad_request("invalid_grouping", e))?;
    let task = p
        .task
        .as_deref()
        .map(str::parse::<TaskKind>)
        .transpose()
        .map_err(|e| ApiError::bad_request("invalid_query", e))?;
    let model = p
        .model
        .as_deref()
        .map(str::parse::<ModelId>)
        .transpose()
        .map_err(|e| ApiError::bad_request("invalid_query", e.to_string()))?;
    if p.confidence_min.is_some_and(|c| !(1..=5).contains(&c)) {
        return Err(ApiError::bad_request("invalid_query", "confidence_min must be within 1..=5"));
    }
    let filter = RecordFilter {
        task,
        model,
        min_confidence: p.confidence_min,
        ..Default::default()
    };
    Ok(Json(state.store().accuracy_breakdown(&filter, group_by)))
}

#[derive(Debug, Deserialize)]
pub struct ThresholdParams {
    threshold: Option<u8>,
}

fn errors(state: &AppState, params: Result<Query<ThresholdParams>, QueryRejection>, task: TaskKind) -> Result<Vec<ErrorCase>, ApiError> {
    let Query(p) = params.map_err(|r| ApiError::bad_request("invalid_threshold", r.body_text()))?;
    let threshold = p.threshold.unwrap_or(DEFAULT_CONFIDENCE_THRESHOLD);
    Ok(high_confidence_errors(&state.store().all(), Some(task), threshold)?)
}

pub async fn stereotypes(
    State(state): State<AppState>,
    params: Result<Query<ThresholdParams>, QueryRejection>,
) -> Result<Json<TermTable>, ApiError> {
    let errors = errors(&state, params, TaskKind::GenderPrediction)?;
    Ok(Json(count_stereotype_terms(&errors, state.stereotypes(), CountMode::Case)))
}

pub async fn topics(
    State(state): State<AppState>,
    params: Result<Query<ThresholdParams>, QueryRejection>,
) -> Result<Json<TopicTable>, ApiError> {
    let errors = errors(&state, params, TaskKind::GenderPrediction)?;
    Ok(Json(topic_gender_association(&errors, state.topics())?))
}

pub async fn failures(
    State(state): State<AppState>,
    params: Result<Query<ThresholdParams>, QueryRejection>,
) -> Result<Json<FailureDistribution>, ApiError> {
    let errors = errors(&state, params, TaskKind::VotePrediction)?;
    Ok(Json(failure_distribution(&errors, state.ruleset())))
}
