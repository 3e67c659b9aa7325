mod analysis;
mod predict;
mod votes;

use axum::extract::State;
use axum::Json;
use parlvote_core::gateway::ModelId;
use serde::Serialize;

use crate::AppState;

pub(crate) use analysis::{accuracy, failures, stereotypes, topics};
pub(crate) use predict::{counterfactual, predict};
pub use predict::{CounterfactualRequest, CounterfactualResponse, ModelEntry, PredictRequest, PredictResponse};
pub use votes::VoteDetail;
pub(crate) use votes::{get_breakdown, get_vote, list_votes};

#[derive(Debug, Serialize)]
pub struct ModelList {
    models: Vec<ModelId>,
}

pub(crate) async fn list_models(State(state): State<AppState>) -> Json<ModelList> {
    Json(ModelList {
        models: state.gateway().model_ids(),
    })
}
