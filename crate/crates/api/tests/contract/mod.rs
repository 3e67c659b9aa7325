//! API contract checks shared by the api integration tests and the
//! acceptance suite. Every response passes through [`Harness::call`], which
//! validates 2xx bodies against the named schema and everything else
//! against the error schema.

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use parlvote_api::{app, AppState};
use parlvote_core::analysis::{
    count_stereotype_terms, failure_distribution, high_confidence_errors, topic_gender_association, CountMode,
    FailureRuleset, Lexicon,
};
use parlvote_core::corpus::{load_corpus, Corpus, Speech};
use parlvote_core::gateway::{
    Gateway, Label, ModelId, ProviderLimits, RegistryConfig, RetryPolicy, StubProvider, StubReply, StubRule,
    StubScript, TaskKind,
};
use parlvote_core::store::{GroupBy, PredictionStore, RecordFilter};
use parlvote_testkit::gen;
use serde_json::{json, Value};
use tower::ServiceExt;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

macro_rules! ensure_eq {
    ($a:expr, $b:expr) => {
        match (&$a, &$b) {
            (a, b) => {
                if a != b {
                    return Err(format!("{} = {:?}, expected {:?} (line {})", stringify!($a), a, b, line!()));
                }
            }
        }
    };
}

const SCHEMAS: [(&str, &str); 11] = [
    ("error", include_str!("../../schemas/error.json")),
    ("vote_page", include_str!("../../schemas/vote_page.json")),
    ("vote_detail", include_str!("../../schemas/vote_detail.json")),
    ("breakdown", include_str!("../../schemas/breakdown.json")),
    ("models", include_str!("../../schemas/models.json")),
    ("predict_response", include_str!("../../schemas/predict_response.json")),
    ("counterfactual_response", include_str!("../../schemas/counterfactual_response.json")),
    ("metrics_table", include_str!("../../schemas/metrics_table.json")),
    ("term_table", include_str!("../../schemas/term_table.json")),
    ("topic_table", include_str!("../../schemas/topic_table.json")),
    ("failure_distribution", include_str!("../../schemas/failure_distribution.json")),
];

pub fn validate(schema: &str, body: &Value) -> Check {
    let text = SCHEMAS
        .iter()
        .find(|(n, _)| *n == schema)
        .ok_or_else(|| format!("no schema `{schema}`"))?
        .1;
    let schema_json: Value = serde_json::from_str(text).map_err(|e| format!("{schema}: {e}"))?;
    let validator = jsonschema::validator_for(&schema_json).map_err(|e| format!("{schema}: {e}"))?;
    let errors: Vec<String> = validator.iter_errors(body).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    ensure!(errors.is_empty(), "{schema} violated: {errors:?}\nbody: {body}");
    Ok(())
}

pub fn fixture_corpus() -> Corpus {
    load_corpus(parlvote_testkit::fixture("corpus")).expect("fixture corpus")
}

fn fast_limits() -> ProviderLimits {
    ProviderLimits {
        max_in_flight: 4,
        attempt_timeout: Duration::from_millis(100),
        retry: RetryPolicy {
            max_retries: 0,
            base_backoff: Duration::from_millis(1),
        },
    }
}

/// Stub models: `alpha`/`beta` seeded, `hang` never answers, `flip` says
/// For when told the speaker is male and Against otherwise.
pub fn stub_gateway() -> Gateway {
    let stub = StubProvider::new("stub")
        .with_model("alpha", StubScript::always(StubReply::Seeded { seed: 1 }))
        .with_model("beta", StubScript::always(StubReply::Seeded { seed: 2 }))
        .with_model("hang", StubScript::always(StubReply::Hang))
        .with_model(
            "flip",
            StubScript {
                rules: vec![StubRule {
                    when_contains: "The speaker's gender is Male.".into(),
                    reply: StubReply::Answer {
                        label: Label::For,
                        confidence: 4,
                        reasoning: "Male speaker.".into(),
                    },
                }],
                fallback: StubReply::Answer {
                    label: Label::Against,
                    confidence: 4,
                    reasoning: "Female speaker.".into(),
                },
                latency_ms: 0,
            },
        );
    let mut g = Gateway::new();
    g.register_stub(
        "stub",
        Arc::new(stub),
        ["alpha", "beta", "hang", "flip"].map(String::from),
        fast_limits(),
    );
    g
}

pub struct Harness {
    pub state: AppState,
    app: Router,
}

impl Harness {
    pub fn new(corpus: Corpus, gateway: Gateway, store: PredictionStore) -> Self {
        Self::with_state(AppState::new(corpus, gateway, store))
    }

    pub fn with_state(state: AppState) -> Self {
        let app = app(state.clone(), Some("http://ui.example")).expect("app");
        Harness { state, app }
    }

    pub fn fixture() -> Self {
        Self::new(fixture_corpus(), stub_gateway(), PredictionStore::in_memory())
    }

    pub async fn raw(&self, method: Method, uri: &str, body: Option<String>) -> (StatusCode, String) {
        let mut req = Request::builder().method(method).uri(uri);
        if body.is_some() {
            req = req.header("content-type", "application/json");
        }
        let req = req.body(body.map_or_else(Body::empty, Body::from)).expect("request");
        let resp = self.app.clone().oneshot(req).await.expect("infallible service");
        let status = resp.status();
        let bytes = resp.into_body().collect().await.expect("body").to_bytes();
        (status, String::from_utf8_lossy(&bytes).into_owned())
    }

    /// Sends a request and validates the body: `schema` on 2xx, the error
    /// schema otherwise.
    pub async fn call(&self, method: Method, uri: &str, body: Option<Value>, schema: &str) -> Result<(StatusCode, Value), String> {
        let (status, text) = self.raw(method, uri, body.map(|b| b.to_string())).await;
        let value: Value = serde_json::from_str(&text).map_err(|e| format!("{uri}: non-JSON body ({e}): {text}"))?;
        if status.is_success() {
            validate(schema, &value)?;
        } else {
            validate("error", &value).map_err(|e| format!("{uri} ({status}): {e}"))?;
        }
        Ok((status, value))
    }

    pub async fn get(&self, uri: &str, schema: &str) -> Result<(StatusCode, Value), String> {
        self.call(Method::GET, uri, None, schema).await
    }

    pub async fn post(&self, uri: &str, body: Value, schema: &str) -> Result<(StatusCode, Value), String> {
        self.call(Method::POST, uri, Some(body), schema).await
    }
}

fn expect_error(status: StatusCode, body: &Value, want: StatusCode, code: &str) -> Check {
    ensure_eq!(status, want);
    ensure_eq!(body["code"].as_str(), Some(code));
    Ok(())
}

pub async fn votes_list() -> Check {
    let h = Harness::fixture();
    let (s, b) = h.get("/v1/votes?q=&page=0&page_size=20", "vote_page").await?;
    ensure_eq!(s, StatusCode::OK);
    ensure_eq!(b["items"].as_array().map(Vec::len), Some(3));
    ensure_eq!(b["total"], json!(3));
    ensure_eq!(b["next_page"], Value::Null);
    let ids: Vec<&str> = b["items"].as_array().unwrap().iter().filter_map(|i| i["id"].as_str()).collect();
    ensure_eq!(ids, vec!["RC1", "RC2", "RC3"]);

    let (_, b) = h.get("/v1/votes?q=migration&sort=title_asc", "vote_page").await?;
    ensure_eq!(b["total"], json!(1));
    let (_, b) = h.get("/v1/votes?page_size=2", "vote_page").await?;
    ensure_eq!(b["next_page"], json!(1));
    Ok(())
}

pub async fn votes_page_beyond_last() -> Check {
    let h = Harness::fixture();
    let (s, b) = h.get("/v1/votes?page=7&page_size=20", "vote_page").await?;
    ensure_eq!(s, StatusCode::OK);
    ensure_eq!(b["items"], json!([]));
    ensure_eq!(b["total"], json!(3));
    Ok(())
}

pub async fn votes_bad_queries() -> Check {
    let h = Harness::fixture();
    for uri in [
        "/v1/votes?page_size=0",
        "/v1/votes?page_size=5000",
        "/v1/votes?sort=loudest",
        "/v1/votes?year=twenty",
        "/v1/votes?page=-1",
    ] {
        let (s, b) = h.get(uri, "vote_page").await?;
        expect_error(s, &b, StatusCode::BAD_REQUEST, "invalid_query").map_err(|e| format!("{uri}: {e}"))?;
    }
    Ok(())
}

pub async fn vote_detail() -> Check {
    let h = Harness::fixture();
    let (s, b) = h.get("/v1/votes/RC1", "vote_detail").await?;
    ensure_eq!(s, StatusCode::OK);
    ensure_eq!(b["report_id"], json!("A9-0156/2023"));
    ensure_eq!(b["participant_count"], json!(5));
    ensure_eq!(b["outcome"], json!("Adopted"));
    ensure_eq!(b["date"], json!("2024-04-23"));
    ensure_eq!(b["totals"], json!({"count_for": 3, "count_against": 1, "count_abstain": 1}));
    let speakers: Vec<&str> = b["speeches"].as_array().unwrap().iter().filter_map(|s| s["mep_id"].as_str()).collect();
    ensure_eq!(speakers, vec!["M1", "M4"]);

    let (s, b) = h.get("/v1/votes/RC3", "vote_detail").await?;
    ensure_eq!(s, StatusCode::OK);
    ensure_eq!(b["speeches"], json!([]));
    ensure_eq!(b["participant_count"], json!(0));

    let (s, b) = h.get("/v1/votes/RC99", "vote_detail").await?;
    expect_error(s, &b, StatusCode::NOT_FOUND, "unknown_roll_call")
}

pub async fn breakdowns() -> Check {
    let h = Harness::fixture();
    let (s, b) = h.get("/v1/votes/RC1/breakdown?pivot=political_group", "breakdown").await?;
    ensure_eq!(s, StatusCode::OK);
    let labels: Vec<&str> = b["rows"].as_array().unwrap().iter().filter_map(|r| r["label"].as_str()).collect();
    ensure_eq!(
        labels,
        vec!["Progressive Alliance of Socialists and Democrats", "European People's Party"]
    );

    for rc in ["RC1", "RC2", "RC3"] {
        let (_, detail) = h.get(&format!("/v1/votes/{rc}"), "vote_detail").await?;
        for pivot in ["gender", "country", "age", "political_group"] {
            let (s, b) = h.get(&format!("/v1/votes/{rc}/breakdown?pivot={pivot}"), "breakdown").await?;
            ensure_eq!(s, StatusCode::OK);
            let rows = b["rows"].as_array().unwrap();
            for key in ["count_for", "count_against", "count_abstain"] {
                let sum: u64 = rows.iter().map(|r| r[key].as_u64().unwrap()).sum();
                ensure!(
                    json!(sum) == b["totals"][key] && b["totals"][key] == detail["totals"][key],
                    "{rc}/{pivot}: {key} rows sum {sum}, totals {}",
                    b["totals"][key]
                );
            }
        }
    }
    let (_, b) = h.get("/v1/votes/RC1/breakdown?pivot=gender", "breakdown").await?;
    ensure_eq!(
        b["rows"],
        json!([
            {"label": "Female", "count_for": 2, "count_against": 0, "count_abstain": 1},
            {"label": "Male", "count_for": 1, "count_against": 1, "count_abstain": 0}
        ])
    );

    let (s, b) = h.get("/v1/votes/RC1/breakdown?pivot=zodiac", "breakdown").await?;
    expect_error(s, &b, StatusCode::BAD_REQUEST, "invalid_pivot")?;
    let (s, b) = h.get("/v1/votes/RC9/breakdown?pivot=gender", "breakdown").await?;
    expect_error(s, &b, StatusCode::NOT_FOUND, "unknown_roll_call")
}

pub async fn models_list() -> Check {
    let h = Harness::fixture();
    let (s, b) = h.get("/v1/models", "models").await?;
    ensure_eq!(s, StatusCode::OK);
    ensure_eq!(b["models"], json!(["stub/alpha", "stub/beta", "stub/flip", "stub/hang"]));
    Ok(())
}

pub async fn predict_vote_stub() -> Check {
    let h = Harness::fixture();
    let body = json!({
        "task": "vote",
        "speech_id": "S1",
        "context_config": {"include_topic": true},
        "models": ["stub/alpha"]
    });
    let (s, b) = h.post("/v1/predict", body, "predict_response").await?;
    ensure_eq!(s, StatusCode::OK);
    ensure_eq!(b["ground_truth"], json!("For"));
    ensure_eq!(b["roll_call_id"], json!("RC1"));
    ensure_eq!(b["context"]["attributes"], json!({"topic": "environment"}));
    let entry = &b["results"][0];
    ensure_eq!(entry["status"], json!("ok"));
    ensure!(
        ["For", "Against", "Abstain"].contains(&entry["label"].as_str().unwrap_or("")),
        "label {}",
        entry["label"]
    );
    ensure!(!entry["reasoning"].as_str().unwrap_or("").is_empty(), "empty reasoning");

    let stored = h.state.store().all();
    ensure_eq!(stored.len(), 1);
    let r = &stored[0];
    ensure_eq!(json!(r.record_id), entry["record_id"]);
    ensure_eq!(json!(r.parsed.label), entry["label"]);
    ensure_eq!(json!(r.parsed.confidence), entry["confidence"]);
    ensure_eq!(json!(r.context_fingerprint.as_str()), b["context_fingerprint"]);
    ensure_eq!(json!(r.correct), entry["correct"]);

    let calls = h.state.gateway().stub("stub").unwrap().calls();
    ensure_eq!(calls.len(), 1);
    ensure!(calls[0].prompt.user_text.contains("The debate topic is: environment."), "topic sentence missing");
    ensure!(!calls[0].prompt.user_text.contains("gender"), "undisclosed attribute leaked into prompt");
    Ok(())
}

pub async fn predict_gender_rejects_gender_flag() -> Check {
    let h = Harness::fixture();
    let body = json!({
        "task": "gender",
        "speech_id": "S1",
        "context_config": {"include_gender": true},
        "models": ["stub/alpha"]
    });
    let (s, b) = h.post("/v1/predict", body, "predict_response").await?;
    expect_error(s, &b, StatusCode::BAD_REQUEST, "invalid_config")?;
    ensure_eq!(h.state.store().len(), 0);

    let body = json!({
        "task": "gender",
        "speech_id": "S1",
        "context_config": {"include_topic": true, "overrides": {"gender": "Male"}},
        "models": ["stub/alpha"]
    });
    let (s, b) = h.post("/v1/predict", body, "predict_response").await?;
    expect_error(s, &b, StatusCode::BAD_REQUEST, "illegal_override")?;
    ensure_eq!(h.state.store().len(), 0);
    Ok(())
}

pub async fn predict_partial_failure() -> Check {
    let h = Harness::fixture();
    let body = json!({
        "task": "gender",
        "speech_id": "S3",
        "context_config": {},
        "models": ["stub/alpha", "stub/hang"]
    });
    let (s, b) = h.post("/v1/predict", body, "predict_response").await?;
    ensure_eq!(s, StatusCode::OK);
    ensure_eq!(b["ground_truth"], json!("Male"));
    ensure_eq!(b["roll_call_id"], Value::Null);
    let results = b["results"].as_array().unwrap();
    ensure_eq!(results.len(), 2);
    ensure_eq!(results[0]["model"], json!("stub/alpha"));
    ensure_eq!(results[0]["status"], json!("ok"));
    ensure_eq!(results[1]["model"], json!("stub/hang"));
    ensure_eq!(results[1]["status"], json!("error"));
    ensure_eq!(results[1]["error"]["code"], json!("provider_timeout"));
    ensure_eq!(results[1]["error"]["details"]["status"], json!(504));
    ensure_eq!(h.state.store().len(), 1);
    Ok(())
}

pub async fn predict_deadline_exceeded() -> Check {
    let stub = StubProvider::new("stub").with_model("hang", StubScript::always(StubReply::Hang));
    let mut g = Gateway::new();
    let mut limits = fast_limits();
    limits.attempt_timeout = Duration::from_secs(30);
    g.register_stub("stub", Arc::new(stub), ["hang".to_string()], limits);
    let state = AppState::new(fixture_corpus(), g, PredictionStore::in_memory()).with_deadline(Duration::from_millis(150));
    let h = Harness::with_state(state);
    let body = json!({"task": "vote", "speech_id": "S1", "models": ["stub/hang"]});
    let started = std::time::Instant::now();
    let (s, b) = h.post("/v1/predict", body, "predict_response").await?;
    ensure_eq!(s, StatusCode::GATEWAY_TIMEOUT);
    ensure_eq!(b["code"], json!("deadline_exceeded"));
    ensure!(started.elapsed() < Duration::from_secs(5), "deadline not enforced");
    ensure_eq!(h.state.store().len(), 0);
    Ok(())
}

pub async fn predict_request_errors() -> Check {
    let mut corpus_parts = fixture_corpus();
    let mut speeches: Vec<Speech> = corpus_parts.speeches().cloned().collect();
    speeches.push(Speech {
        id: "S9".into(),
        debate_id: "D3".into(),
        mep_id: "M1".into(),
        text: "A speech with no recorded vote.".into(),
    });
    corpus_parts = Corpus::from_parts(
        corpus_parts.groups().cloned().collect(),
        corpus_parts.meps().cloned().collect(),
        corpus_parts.debates().cloned().collect(),
        speeches,
        corpus_parts.roll_calls().cloned().collect(),
    );
    let h = Harness::new(corpus_parts, stub_gateway(), PredictionStore::in_memory());

    let req = |speech: &str, models: Value| json!({"task": "vote", "speech_id": speech, "models": models});
    let (s, b) = h.post("/v1/predict", req("S9", json!(["stub/alpha"])), "predict_response").await?;
    expect_error(s, &b, StatusCode::UNPROCESSABLE_ENTITY, "no_ground_truth")?;
    let (s, b) = h.post("/v1/predict", req("S404", json!(["stub/alpha"])), "predict_response").await?;
    expect_error(s, &b, StatusCode::NOT_FOUND, "unknown_speech")?;
    let (s, b) = h.post("/v1/predict", req("S1", json!(["stub/gamma"])), "predict_response").await?;
    expect_error(s, &b, StatusCode::BAD_REQUEST, "unknown_model")?;
    let (s, b) = h.post("/v1/predict", req("S1", json!([])), "predict_response").await?;
    expect_error(s, &b, StatusCode::BAD_REQUEST, "invalid_request")?;
    let (s, b) = h.post("/v1/predict", req("S1", json!(["no-slash"])), "predict_response").await?;
    ensure!(s.is_client_error(), "bad model id gave {s}");
    ensure_eq!(b["code"], json!("invalid_body"));
    let mut bad_params = req("S1", json!(["stub/alpha"]));
    bad_params["params"] = json!({"temperature": 9.0, "max_output_tokens": 10});
    let (s, b) = h.post("/v1/predict", bad_params, "predict_response").await?;
    expect_error(s, &b, StatusCode::BAD_REQUEST, "invalid_params")?;

    let (s, text) = h.raw(Method::POST, "/v1/predict", Some("{not json".into())).await;
    ensure_eq!(s, StatusCode::BAD_REQUEST);
    validate("error", &serde_json::from_str(&text).map_err(|e| e.to_string())?)?;
    ensure_eq!(h.state.store().len(), 0);
    Ok(())
}

pub async fn counterfactual_group() -> Check {
    let h = Harness::fixture();
    let body = json!({
        "task": "vote",
        "speech_id": "S2",
        "base_config": {"include_topic": true, "include_political_group": true},
        "overrides": {"political_group": "G-ECR"},
        "models": ["stub/alpha", "stub/beta"]
    });
    let (s, b) = h.post("/v1/predict/counterfactual", body, "counterfactual_response").await?;
    ensure_eq!(s, StatusCode::OK);
    ensure_eq!(
        b["diff"],
        json!([{
            "attribute": "political_group",
            "base": "European People's Party",
            "counterfactual": "European Conservatives and Reformists"
        }])
    );
    ensure_eq!(b["counterfactual"]["context"]["overridden"], json!(["political_group"]));
    ensure!(
        b["base"]["context_fingerprint"] != b["counterfactual"]["context_fingerprint"],
        "fingerprints should differ"
    );
    ensure_eq!(b["base"]["results"].as_array().map(Vec::len), Some(2));

    let calls = h.state.gateway().stub("stub").unwrap().calls();
    ensure_eq!(calls.len(), 4);
    ensure!(calls.iter().all(|c| c.params == calls[0].params), "params differ between runs");
    ensure_eq!(h.state.store().len(), 0);

    let body = json!({
        "task": "vote",
        "speech_id": "S2",
        "base_config": {"include_political_group": true},
        "overrides": {},
        "models": ["stub/alpha"]
    });
    let (s, b) = h.post("/v1/predict/counterfactual", body, "counterfactual_response").await?;
    expect_error(s, &b, StatusCode::BAD_REQUEST, "invalid_request")?;

    let body = json!({
        "task": "vote",
        "speech_id": "S2",
        "base_config": {},
        "overrides": {"country": "PL"},
        "models": ["stub/alpha"]
    });
    let (s, b) = h.post("/v1/predict/counterfactual", body, "counterfactual_response").await?;
    expect_error(s, &b, StatusCode::BAD_REQUEST, "illegal_override")
}

pub async fn counterfactual_gender_flip() -> Check {
    let h = Harness::fixture();
    // S2 is given by a male member
    let body = json!({
        "task": "vote",
        "speech_id": "S2",
        "base_config": {"include_gender": true},
        "overrides": {"gender": "female"},
        "models": ["stub/flip", "stub/alpha"]
    });
    let (s, b) = h.post("/v1/predict/counterfactual", body, "counterfactual_response").await?;
    ensure_eq!(s, StatusCode::OK);
    ensure_eq!(b["diff"], json!([{"attribute": "gender", "base": "Male", "counterfactual": "Female"}]));
    ensure_eq!(b["base"]["results"][0]["label"], json!("For"));
    ensure_eq!(b["counterfactual"]["results"][0]["label"], json!("Against"));
    let flips: Vec<&Value> = b["label_changes"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["model"] == json!("stub/flip"))
        .collect();
    ensure_eq!(flips, vec![&json!({"model": "stub/flip", "base": "For", "counterfactual": "Against"})]);
    Ok(())
}

/// A store of 400 records whose gender and vote reasoning mention lexicon
/// and rule vocabulary.
pub fn seeded_store(seed: u64) -> PredictionStore {
    let mut rng = gen::rng(seed);
    let stereo = Lexicon::default_stereotypes();
    let topics = Lexicon::default_topics();
    let rules = FailureRuleset::default_rules();
    let mut spellings: Vec<String> = stereo
        .entries()
        .iter()
        .chain(topics.entries())
        .flat_map(|e| std::iter::once(e.term.clone()).chain(e.variants.clone()))
        .collect();
    let spec = rules.spec();
    spellings.extend(spec.keyword_reliance.against_triggers.iter().cloned());
    spellings.extend(spec.keyword_reliance.for_triggers.iter().cloned());
    spellings.extend(spec.criticism_as_reform.criticism_markers.iter().cloned());
    spellings.extend(spec.criticism_as_reform.reform_markers.iter().cloned());
    spellings.extend(spec.uncertainty_default_for.markers.iter().cloned());

    let store = PredictionStore::in_memory();
    for mut r in gen::random_records(&mut rng, 400) {
        r.parsed.reasoning = gen::random_trace(&mut rng, &spellings);
        store.append(r).expect("seed record");
    }
    store
}

pub async fn analysis_matches_direct_calls() -> Check {
    let h = Harness::new(fixture_corpus(), stub_gateway(), seeded_store(11));
    let records = h.state.store().all();
    let filter_model = ModelId::new("stub", "alpha");

    for task in [TaskKind::VotePrediction, TaskKind::GenderPrediction] {
        for g in GroupBy::ALL {
            let (s, b) = h.get(&format!("/v1/analysis/accuracy?task={task}&group_by={g}"), "metrics_table").await?;
            ensure_eq!(s, StatusCode::OK);
            let direct = h.state.store().accuracy_breakdown(&RecordFilter::task(task), g);
            ensure_eq!(b, serde_json::to_value(&direct).unwrap());
        }
        let uri = format!("/v1/analysis/accuracy?task={task}&group_by=country&model=stub/alpha&confidence_min=3");
        let (_, b) = h.get(&uri, "metrics_table").await?;
        let filter = RecordFilter {
            task: Some(task),
            model: Some(filter_model.clone()),
            min_confidence: Some(3),
            ..Default::default()
        };
        ensure_eq!(b, serde_json::to_value(h.state.store().accuracy_breakdown(&filter, GroupBy::Country)).unwrap());
    }

    for threshold in 1..=5u8 {
        let gender = high_confidence_errors(&records, Some(TaskKind::GenderPrediction), threshold).unwrap();
        let vote = high_confidence_errors(&records, Some(TaskKind::VotePrediction), threshold).unwrap();

        let (_, b) = h.get(&format!("/v1/analysis/stereotypes?threshold={threshold}"), "term_table").await?;
        let direct = count_stereotype_terms(&gender, h.state.stereotypes(), CountMode::Case);
        ensure_eq!(b, serde_json::to_value(&direct).unwrap());
        if threshold == 4 {
            ensure!(!direct.rows.is_empty(), "seeded store should produce stereotype rows");
        }

        let (_, b) = h.get(&format!("/v1/analysis/topics?threshold={threshold}"), "topic_table").await?;
        let direct = topic_gender_association(&gender, h.state.topics()).unwrap();
        ensure_eq!(b, serde_json::to_value(&direct).unwrap());

        let (_, b) = h.get(&format!("/v1/analysis/failures?threshold={threshold}"), "failure_distribution").await?;
        let direct = failure_distribution(&vote, h.state.ruleset());
        ensure_eq!(b, serde_json::to_value(&direct).unwrap());
    }
    let (_, default) = h.get("/v1/analysis/stereotypes", "term_table").await?;
    let (_, four) = h.get("/v1/analysis/stereotypes?threshold=4", "term_table").await?;
    ensure_eq!(default, four);
    Ok(())
}

pub async fn analysis_empty_store() -> Check {
    let h = Harness::fixture();
    for (uri, schema) in [
        ("/v1/analysis/accuracy?task=vote&group_by=gender", "metrics_table"),
        ("/v1/analysis/stereotypes", "term_table"),
        ("/v1/analysis/topics", "topic_table"),
        ("/v1/analysis/failures", "failure_distribution"),
    ] {
        let (s, b) = h.get(uri, schema).await?;
        ensure_eq!(s, StatusCode::OK);
        ensure_eq!(b["rows"], json!([]));
    }
    Ok(())
}

pub async fn accuracy_genders_present() -> Check {
    let h = Harness::fixture();
    // vote predictions only for the female speakers S1, S4, S5; gender
    // predictions for the male speaker S2
    for (task, speech) in [("vote", "S1"), ("vote", "S4"), ("vote", "S5"), ("gender", "S2")] {
        let body = json!({"task": task, "speech_id": speech, "models": ["stub/alpha"]});
        let (s, _) = h.post("/v1/predict", body, "predict_response").await?;
        ensure_eq!(s, StatusCode::OK);
    }
    let (s, b) = h.get("/v1/analysis/accuracy?task=vote&group_by=gender", "metrics_table").await?;
    ensure_eq!(s, StatusCode::OK);
    let rows = b["rows"].as_array().unwrap();
    ensure_eq!(rows.len(), 1);
    ensure_eq!(rows[0]["group"], json!("Female"));
    ensure_eq!(rows[0]["n"], json!(3));
    let (_, b) = h.get("/v1/analysis/accuracy?group_by=gender", "metrics_table").await?;
    let groups: Vec<&str> = b["rows"].as_array().unwrap().iter().filter_map(|r| r["group"].as_str()).collect();
    ensure_eq!(groups, vec!["Female", "Male"]);
    Ok(())
}

pub async fn analysis_bad_params() -> Check {
    let h = Harness::fixture();
    for (uri, code) in [
        ("/v1/analysis/accuracy?task=vote&group_by=zodiac", "invalid_grouping"),
        ("/v1/analysis/accuracy?task=vote", "invalid_grouping"),
        ("/v1/analysis/accuracy?task=poll&group_by=gender", "invalid_query"),
        ("/v1/analysis/accuracy?group_by=gender&confidence_min=9", "invalid_query"),
        ("/v1/analysis/stereotypes?threshold=9", "invalid_threshold"),
        ("/v1/analysis/topics?threshold=0", "invalid_threshold"),
        ("/v1/analysis/failures?threshold=high", "invalid_threshold"),
    ] {
        let (s, b) = h.get(uri, "metrics_table").await?;
        expect_error(s, &b, StatusCode::BAD_REQUEST, code).map_err(|e| format!("{uri}: {e}"))?;
    }
    Ok(())
}

pub async fn reads_are_idempotent() -> Check {
    let h = Harness::new(fixture_corpus(), stub_gateway(), seeded_store(5));
    let before = h.state.store().len();
    for uri in [
        "/v1/votes?q=e&sort=participants_desc",
        "/v1/votes/RC2",
        "/v1/votes/RC2/breakdown?pivot=age",
        "/v1/models",
        "/v1/analysis/accuracy?group_by=political_group",
        "/v1/analysis/stereotypes",
        "/v1/analysis/topics",
        "/v1/analysis/failures",
    ] {
        let a = h.raw(Method::GET, uri, None).await;
        let b = h.raw(Method::GET, uri, None).await;
        ensure_eq!(a.0, StatusCode::OK);
        ensure!(a == b, "{uri} changed between calls");
    }
    ensure_eq!(h.state.store().len(), before);
    Ok(())
}

pub async fn routing_errors() -> Check {
    let h = Harness::fixture();
    let (s, b) = h.get("/v1/nothing-here", "error").await?;
    expect_error(s, &b, StatusCode::NOT_FOUND, "not_found")?;
    let (s, b) = h.call(Method::DELETE, "/v1/votes", None, "error").await?;
    expect_error(s, &b, StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed")?;
    let (s, b) = h.get("/v1/predict", "error").await?;
    expect_error(s, &b, StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed")
}

pub async fn cors_allows_ui_origin() -> Check {
    let h = Harness::fixture();
    let req = Request::builder()
        .method(Method::OPTIONS)
        .uri("/v1/predict")
        .header("origin", "http://ui.example")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = h.app.clone().oneshot(req).await.unwrap();
    let allowed = resp.headers().get("access-control-allow-origin").and_then(|v| v.to_str().ok());
    ensure_eq!(allowed, Some("http://ui.example"));

    let req = Request::builder()
        .uri("/v1/models")
        .header("origin", "http://elsewhere.example")
        .body(Body::empty())
        .unwrap();
    let resp = h.app.clone().oneshot(req).await.unwrap();
    ensure!(resp.headers().get("access-control-allow-origin").is_none(), "foreign origin allowed");
    Ok(())
}

pub async fn no_credentials_or_endpoints() -> Check {
    const SECRET: &str = "sk-contract-4f9a1c";
    const ENDPOINT: &str = "http://127.0.0.1:9/private-relay/chat";
    std::env::set_var("PARLVOTE_CONTRACT_KEY", SECRET);
    let registry = RegistryConfig::from_toml(&format!(
        "[providers.remote]\nendpoint = \"{ENDPOINT}\"\nauth_env = \"PARLVOTE_CONTRACT_KEY\"\nmax_retries = 0\ntimeout_ms = 2000\n[providers.remote.models.m1]\n"
    ))
    .map_err(|e| e.to_string())?;
    let mut gateway = Gateway::from_config(&registry).map_err(|e| e.to_string())?;
    let stub = StubProvider::new("stub").with_model("alpha", StubScript::always(StubReply::Seeded { seed: 1 }));
    gateway.register_stub("stub", Arc::new(stub), ["alpha".to_string()], fast_limits());
    let h = Harness::new(fixture_corpus(), gateway, PredictionStore::in_memory());

    let body = json!({"task": "vote", "speech_id": "S1", "models": ["remote/m1", "stub/alpha"]});
    let (s, text) = h.raw(Method::POST, "/v1/predict", Some(body.to_string())).await;
    ensure_eq!(s, StatusCode::OK);
    let b: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    validate("predict_response", &b)?;
    ensure_eq!(b["results"][0]["status"], json!("error"));
    ensure_eq!(b["results"][0]["error"]["code"], json!("transport_failure"));
    let (_, models) = h.raw(Method::GET, "/v1/models", None).await;
    for t in [&text, &models] {
        ensure!(!t.contains(SECRET), "credential leaked: {t}");
        ensure!(!t.contains("127.0.0.1:9") && !t.contains("private-relay"), "endpoint leaked: {t}");
    }
    Ok(())
}

/// Every check, in a fixed order, for the acceptance report.
pub async fn all() -> Vec<(&'static str, Check)> {
    vec![
        ("votes_list", votes_list().await),
        ("votes_page_beyond_last", votes_page_beyond_last().await),
        ("votes_bad_queries", votes_bad_queries().await),
        ("vote_detail", vote_detail().await),
        ("breakdowns", breakdowns().await),
        ("models_list", models_list().await),
        ("predict_vote_stub", predict_vote_stub().await),
        ("predict_gender_rejects_gender_flag", predict_gender_rejects_gender_flag().await),
        ("predict_partial_failure", predict_partial_failure().await),
        ("predict_deadline_exceeded", predict_deadline_exceeded().await),
        ("predict_request_errors", predict_request_errors().await),
        ("counterfactual_group", counterfactual_group().await),
        ("counterfactual_gender_flip", counterfactual_gender_flip().await),
        ("analysis_matches_direct_calls", analysis_matches_direct_calls().await),
        ("analysis_empty_store", analysis_empty_store().await),
        ("accuracy_genders_present", accuracy_genders_present().await),
        ("analysis_bad_params", analysis_bad_params().await),
        ("reads_are_idempotent", reads_are_idempotent().await),
        ("routing_errors", routing_errors().await),
        ("cors_allows_ui_origin", cors_allows_ui_origin().await),
        ("no_credentials_or_endpoints", no_credentials_or_endpoints().await),
    ]
}
