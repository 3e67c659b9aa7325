//! `/v1` JSON API: vote browsing and breakdowns, prediction runs with
//! counterfactual probes, and bias analysis over the prediction log.

mod config;
mod error;
mod routes;

use std::sync::Arc;
use std::time::Duration;

use axum::http::{HeaderValue, Method, StatusCode};
use axum::routing::{get, post};
use axum::Router;
use parlvote_core::analysis::{FailureRuleset, Lexicon, StereotypeLexicon, TopicLexicon};
use parlvote_core::corpus::{load_corpus, Corpus};
use parlvote_core::gateway::{Gateway, RegistryConfig};
use parlvote_core::store::PredictionStore;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use config::{ApiConfig, ConfigError, DEFAULT_DEADLINE_SECS};
pub use error::{batch_error, ApiError};
pub use routes::{
    CounterfactualRequest, CounterfactualResponse, ModelEntry, PredictRequest, PredictResponse, VoteDetail,
};

struct Inner {
    corpus: Corpus,
    gateway: Gateway,
    store: PredictionStore,
    stereotypes: StereotypeLexicon,
    topics: TopicLexicon,
    ruleset: FailureRuleset,
    deadline: Duration,
}

/// Shared, read-mostly state behind every handler.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("corpus: {0}")]
    Corpus(#[from] parlvote_core::corpus::LoadError),
    #[error("store: {0}")]
    Store(#[from] parlvote_core::store::StoreError),
    #[error("registry: {0}")]
    Registry(#[from] parlvote_core::gateway::RegistryError),
    #[error("lexicon: {0}")]
    Lexicon(#[from] parlvote_core::analysis::LexiconError),
    #[error("failure rules: {0}")]
    Rules(#[from] parlvote_core::analysis::RulesetError),
    #[error("invalid ui_origin `{0}`")]
    Origin(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}

impl AppState {
    /// State with the built-in lexicons and rules and the default deadline.
    pub fn new(corpus: Corpus, gateway: Gateway, store: PredictionStore) -> Self {
        AppState(Arc::new(Inner {
            corpus,
            gateway,
            store,
            stereotypes: Lexicon::default_stereotypes(),
            topics: Lexicon::default_topics(),
            ruleset: FailureRuleset::default_rules(),
            deadline: Duration::from_secs(DEFAULT_DEADLINE_SECS),
        }))
    }

    pub fn with_deadline(self, deadline: Duration) -> Self {
        let mut inner = Arc::try_unwrap(self.0).unwrap_or_else(|_| panic!("state already shared"));
        inner.deadline = deadline;
        AppState(Arc::new(inner))
    }

    pub fn from_config(config: &ApiConfig) -> Result<Self, StartupError> {
        let corpus = load_corpus(&config.corpus)?;
        let store = PredictionStore::open(&config.store)?;
        let registry = match &config.registry {
            Some(p) => RegistryConfig::from_file(p)?,
            None => RegistryConfig::demo(),
        };
        let gateway = Gateway::from_config(&registry)?;
        let stereotypes = match &config.stereotype_lexicon {
            Some(p) => Lexicon::from_file(p)?,
            None => Lexicon::default_stereotypes(),
        };
        let topics = match &config.topic_lexicon {
            Some(p) => Lexicon::from_file(p)?,
            None => Lexicon::default_topics(),
        };
        let ruleset = match &config.failure_rules {
            Some(p) => FailureRuleset::from_file(p)?,
            None => FailureRuleset::default_rules(),
        };
        Ok(AppState(Arc::new(Inner {
            corpus,
            gateway,
            store,
            stereotypes,
            topics,
            ruleset,
            deadline: Duration::from_secs(config.deadline_secs),
        })))
    }

    pub fn corpus(&self) -> &Corpus {
        &self.0.corpus
    }

    pub fn gateway(&self) -> &Gateway {
        &self.0.gateway
    }

    pub fn store(&self) -> &PredictionStore {
        &self.0.store
    }

    pub fn stereotypes(&self) -> &StereotypeLexicon {
        &self.0.stereotypes
    }

    pub fn topics(&self) -> &TopicLexicon {
        &self.0.topics
    }

    pub fn ruleset(&self) -> &FailureRuleset {
        &self.0.ruleset
    }

    pub fn deadline(&self) -> Duration {
        self.0.deadline
    }
}

pub fn router(state: AppState) -> Router {
    let v1 = Router::new()
        .route("/votes", get(routes::list_votes))
        .route("/votes/{id}", get(routes::get_vote))
        .route("/votes/{id}/breakdown", get(routes::get_breakdown))
        .route("/models", get(routes::list_models))
        .route("/predict", post(routes::predict))
        .route("/predict/counterfactual", post(routes::counterfactual))
        .route("/analysis/accuracy", get(routes::accuracy))
        .route("/analysis/stereotypes", get(routes::stereotypes))
        .route("/analysis/topics", get(routes::topics))
        .route("/analysis/failures", get(routes::failures));
    Router::new()
        .nest("/v1", v1)
        .fallback(|| async { ApiError::not_found("not_found", "no such endpoint") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this endpoint")
        })
        .with_state(state)
}

/// Allows the UI origin to call the API from a browser.
pub fn cors(ui_origin: Option<&str>) -> Result<CorsLayer, StartupError> {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    Ok(match ui_origin {
        Some(o) => {
            let v = HeaderValue::from_str(o).map_err(|_| StartupError::Origin(o.to_string()))?;
            layer.allow_origin(AllowOrigin::list([v]))
        }
        None => layer,
    })
}

pub fn app(state: AppState, ui_origin: Option<&str>) -> Result<Router, StartupError> {
    Ok(router(state).layer(cors(ui_origin)?))
}

/// Loads everything named in `config` and serves until Ctrl-C.
pub async fn serve(config: &ApiConfig) -> Result<(), StartupError> {
    let state = AppState::from_config(config)?;
    let app = app(state, config.ui_origin.as_deref())?;
    let listener = tokio::net::TcpListener::bind(&config.bind)
        .await
        .map_err(|source| StartupError::Bind {
            addr: config.bind.clone(),
            source,
        })?;
    tracing::info!(addr = %config.bind, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| StartupError::Bind {
            addr: config.bind.clone(),
            source,
        })
}
