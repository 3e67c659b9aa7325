use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::Json;
use chrono::NaiveDate;
use parlvote_core::aggregation::{search_votes, vote_breakdown, Breakdown, PivotKey, SortKey, VoteIndexQuery, VotePage};
use parlvote_core::corpus::{ChoiceCounts, Outcome};
use serde::{Deserialize, Serialize};

use crate::{ApiError, AppState};

#[derive(Debug, Deserialize)]
pub struct VotesParams {
    q: Option<String>,
    year: Option<i32>,
    topic: Option<String>,
    sort: Option<String>,
    page: Option<usize>,
    page_size: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct VotePageResponse {
    #[serde(flatten)]
    page: VotePage,
    /// Page index to request next, absent on the last page.
    next_page: Option<usize>,
}

pub async fn list_votes(
    State(state): State<AppState>,
    params: Result<Query<VotesParams>, QueryRejection>,
) -> Result<Json<VotePageResponse>, ApiError> {
    let Query(p) = params?;
    let defaults = VoteIndexQuery::default();
    let sort = match p.sort.as_deref() {
        None | Some("") => SortKey::default(),
        Some(s) => s.parse().map_err(|e: String| ApiError::bad_request("invalid_query", e))?,
    };
    let query = VoteIndexQuery {
        text_query: p.q,
        year: p.year,
        topic: p.topic.filter(|t| !t.trim().is_empty()),
        sort,
        page: p.page.unwrap_or(defaults.page),
        page_size: p.page_size.unwrap_or(defaults.page_size),
    };
    let page = search_votes(state.corpus(), &query)?;
    let next_page = ((page.page + 1) * page.page_size < page.total).then_some(page.page + 1);
    Ok(Json(VotePageResponse { page, next_page }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechSummary {
    pub id: String,
    pub mep_id: String,
    pub mep_name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteDetail {
    pub id: String,
    pub debate_id: String,
    pub title: String,
    pub topic: String,
    pub date: NaiveDate,
    pub report_id: String,
    pub outcome: Outcome,
    pub participant_count: usize,
    pub totals: ChoiceCounts,
    pub speeches: Vec<SpeechSummary>,
}

pub async fn get_vote(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<VoteDetail>, ApiError> {
    let corpus = state.corpus();
    let unknown = || ApiError::not_found("unknown_roll_call", format!("unknown roll call `{id}`"));
    let rc = corpus.roll_call(&id).ok_or_else(unknown)?;
    let debate = corpus.debate(&rc.debate_id).ok_or_else(unknown)?;
    let speeches = corpus
        .speeches_for_debate(&debate.id)
        .map_err(|_| unknown())?
        .into_iter()
        .map(|(s, m)| SpeechSummary {
            id: s.id.clone(),
            mep_id: m.id.clone(),
            mep_name: m.full_name.clone(),
            text: s.text.clone(),
        })
        .collect();
    Ok(Json(VoteDetail {
        id: rc.id.clone(),
        debate_id: debate.id.clone(),
        title: debate.title.clone(),
        topic: debate.topic.clone(),
        date: rc.date,
        report_id: debate.report_id.clone(),
        outcome: rc.outcome,
        participant_count: rc.participant_count(),
        totals: rc.totals(),
        speeches,
    }))
}

#[derive(Debug, Deserialize)]
pub struct BreakdownParams {
    pivot: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct BreakdownResponse {
    #[serde(flatten)]
    breakdown: Breakdown,
    totals: ChoiceCounts,
}

pub async fn get_breakdown(
    State(state): State<AppState>,
    Path(id): Path<String>,
    params: Result<Query<BreakdownParams>, QueryRejection>,
) -> Result<Json<BreakdownResponse>, ApiError> {
    let Query(p) = params?;
    let pivot = match p.pivot.as_deref() {
        None => PivotKey::default(),
        Some(s) => s.parse().map_err(|e: String| ApiError::bad_request("invalid_pivot", e))?,
    };
    let breakdown = vote_breakdown(state.corpus(), &id, pivot)?;
    let totals = breakdown.totals();
    Ok(Json(BreakdownResponse { breakdown, totals }))
}
