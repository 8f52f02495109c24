//! HTTP API over a loaded run: subgraphs, predictions, explanations and
//! reviewer feedback.
//!
//! Routes:
//!
//! | method | path                 | success |
//! |--------|----------------------|---------|
//! | GET    | `/subgraph`          | 200     |
//! | GET    | `/predictions`       | 200     |
//! | POST   | `/predict`           | 200     |
//! | GET    | `/explanations`      | 200     |
//! | POST   | `/feedback`          | 201     |
//! | GET    | `/reports/agreement` | 200     |

pub mod feedback;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use lpx_core::eval::{agreement_report, FeedbackRecord, Verdict};
use lpx_core::explain::{ExplanationEnvelope, LinkRef, Technique};
use lpx_core::graph::{ball, Edge, Node, NodeId};
use lpx_core::pipeline::{ExplainError, ExplainerSuite};
use lpx_core::predictor::{LinkPrediction, PredictorError};

pub use feedback::{FeedbackError, FeedbackLog};

pub const DEFAULT_RADIUS: u32 = 2;

/// Immutable state loaded from a run directory.
pub struct Snapshot {
    pub suite: ExplainerSuite,
    pub predictions: Vec<LinkPrediction>,
    /// Stamped on every explanation served from this snapshot.
    pub generated_at: String,
    by_link: HashMap<String, usize>,
}

impl Snapshot {
    pub fn new(suite: ExplainerSuite, predictions: Vec<LinkPrediction>, generated_at: String) -> Self {
        let by_link = predictions
            .iter()
            .enumerate()
            .map(|(i, p)| (p.link_id(), i))
            .collect();
        Snapshot {
            suite,
            predictions,
            generated_at,
            by_link,
        }
    }

    pub fn prediction(&self, link_id: &str) -> Option<&LinkPrediction> {
        self.by_link.get(link_id).map(|&i| &self.predictions[i])
    }
}

pub struct AppState {
    snapshot: RwLock<Arc<Snapshot>>,
    feedback: Mutex<FeedbackLog>,
}

impl AppState {
    pub fn new(snapshot: Snapshot, feedback: FeedbackLog) -> Arc<Self> {
        Arc::new(AppState {
            snapshot: RwLock::new(Arc::new(snapshot)),
            feedback: Mutex::new(feedback),
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    /// Swap in a freshly loaded snapshot; requests in flight keep the old one.
    pub fn replace(&self, snapshot: Snapshot) {
        *self.snapshot.write().expect("snapshot lock poisoned") = Arc::new(snapshot);
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/subgraph", get(get_subgraph))
        .route("/predictions", get(get_predictions))
        .route("/predict", post(post_predict))
        .route("/explanations", get(get_explanation))
        .route("/feedback", post(post_feedback))
        .route("/reports/agreement", get(get_agreement))
        .with_state(state)
}

/// Serve until the future returned by `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[allow(clippy::result_large_err)]
fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body)
        .map_err(|e| error(StatusCode::BAD_REQUEST, format!("malformed request body: {e}")))
}

#[derive(Deserialize)]
struct SubgraphQuery {
    node_id: Option<String>,
    radius: Option<u32>,
}

#[derive(Serialize)]
pub struct SubgraphResponse {
    pub center: NodeId,
    pub radius: u32,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub predicted_links: Vec<LinkPrediction>,
}

async fn get_subgraph(
    State(state): State<Arc<AppState>>,
    query: Result<Query<SubgraphQuery>, QueryRejection>,
) -> Response {
    let Ok(Query(query)) = query else {
        return error(StatusCode::BAD_REQUEST, "radius must be a non-negative integer");
    };
    let Some(node_id) = query.node_id else {
        return error(StatusCode::BAD_REQUEST, "missing node_id");
    };
    let snap = state.snapshot();
    let g = &snap.suite.graph;
    let center = NodeId::from(node_id.as_str());
    let Some(idx) = g.index_of(&center) else {
        return error(StatusCode::NOT_FOUND, format!("unknown node `{center}`"));
    };
    let radius = query.radius.unwrap_or(DEFAULT_RADIUS);
    let sub = g.induced(&ball(g, idx, radius));
    let predicted_links = snap
        .predictions
        .iter()
        .filter(|p| sub.contains(&p.u) && sub.contains(&p.v))
        .cloned()
        .collect();
    Json(SubgraphResponse {
        center,
        radius,
        nodes: sub.nodes().to_vec(),
        edges: sub.edges().to_vec(),
        predicted_links,
    })
    .into_response()
}

async fn get_predictions(State(state): State<Arc<AppState>>) -> Response {
    Json(&state.snapshot().predictions).into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictRequest {
    watchlist: Vec<String>,
    threshold: Option<f64>,
    top_n: Option<usize>,
}

async fn post_predict(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: PredictRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let snap = state.snapshot();
    let watchlist: Vec<NodeId> = req.watchlist.iter().map(|w| NodeId::from(w.as_str())).collect();
    let threshold = req.threshold.unwrap_or(snap.suite.settings.threshold);
    if !(0.0..=1.0).contains(&threshold) {
        return error(StatusCode::BAD_REQUEST, "threshold must be within [0, 1]");
    }
    match snap
        .suite
        .predict(&watchlist, threshold, req.top_n.unwrap_or(usize::MAX))
    {
        Ok(predictions) => Json(predictions).into_response(),
        Err(PredictorError::UnknownWatchlistNode(n)) => {
            error(StatusCode::BAD_REQUEST, format!("unknown node `{n}`"))
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[derive(Deserialize)]
struct ExplanationQuery {
    link_id: Option<String>,
    technique: Option<String>,
}

async fn get_explanation(
    State(state): State<Arc<AppState>>,
    Query(query): Query<ExplanationQuery>,
) -> Response {
    let (Some(link_id), Some(technique)) = (query.link_id, query.technique) else {
        return error(StatusCode::BAD_REQUEST, "link_id and technique are required");
    };
    let technique: Technique = match technique.parse() {
        Ok(t) => t,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("{e}")),
    };
    let snap = state.snapshot();
    let Some(prediction) = snap.prediction(&link_id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown link `{link_id}`"));
    };
    match snap.suite.explain(&prediction.u, &prediction.v, technique) {
        Ok(payload) => Json(ExplanationEnvelope::new(
            LinkRef::new(prediction.u.clone(), prediction.v.clone()),
            payload,
            snap.generated_at.clone(),
        ))
        .into_response(),
        Err(ExplainError::NoPathEvidence(..)) => {
            error(StatusCode::UNPROCESSABLE_ENTITY, "no path evidence")
        }
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedbackRequest {
    link_id: String,
    technique: String,
    annotator: String,
    verdict: Verdict,
    timestamp: Option<String>,
}

async fn post_feedback(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: FeedbackRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let technique: Technique = match req.technique.parse() {
        Ok(t) => t,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("{e}")),
    };
    if req.annotator.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "annotator must not be empty");
    }
    if state.snapshot().prediction(&req.link_id).is_none() {
        return error(StatusCode::BAD_REQUEST, format!("unknown link `{}`", req.link_id));
    }
    let record = FeedbackRecord {
        link_id: req.link_id,
        technique,
        annotator: req.annotator,
        verdict: req.verdict,
        timestamp: req
            .timestamp
            .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
    };
    let mut log = state.feedback.lock().expect("feedback lock poisoned");
    match log.append(record.clone()) {
        Ok(()) => (StatusCode::CREATED, Json(record)).into_response(),
        Err(FeedbackError::Duplicate) => error(StatusCode::CONFLICT, "already recorded"),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[derive(Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

async fn get_agreement(
    State(state): State<Arc<AppState>>,
    Query(query): Query<ReportQuery>,
) -> Response {
    let report = {
        let log = state.feedback.lock().expect("feedback lock poisoned");
        agreement_report(log.records())
    };
    let report = match report {
        Ok(r) => r,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    match query.format.as_deref() {
        None | Some("json") => Json(report).into_response(),
        Some("text") => (
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            report.render(),
        )
            .into_response(),
        Some(other) => error(StatusCode::BAD_REQUEST, format!("unknown format `{other}`")),
    }
}
