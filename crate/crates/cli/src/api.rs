//! The HTTP API behind the co-creative studio.
//!
//! Sessions live in memory. Each holds a grammar and one production; requests
//! that mutate a session take its lock, so they run one at a time, while
//! different sessions proceed independently.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{Mutex, RwLock};
use voxgram::enclosure::EnclosureError;
use voxgram::grammar::{self, GrammarError};
use voxgram::inference::{self, InferenceError};
use voxgram::production::{self, Applied, ConflictPolicy, ProductionError};
use voxgram::{InferenceParams, Production, SearchOps, ShapeGrammar, ShapeId, ShapeSet, ShapeSpec, VoxelModel};

use crate::schemas;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<ProductionError> for ApiError {
    fn from(e: ProductionError) -> Self {
        let status = match e {
            ProductionError::ConflictingPlacement(_) | ProductionError::NothingToUndo => StatusCode::CONFLICT,
            ProductionError::StaleChoice { .. } | ProductionError::UnknownShape(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.to_string())
    }
}

impl From<GrammarError> for ApiError {
    fn from(e: GrammarError) -> Self {
        Self::bad_request(e.to_string())
    }
}

impl From<InferenceError> for ApiError {
    fn from(e: InferenceError) -> Self {
        Self::bad_request(e.to_string())
    }
}

impl From<EnclosureError> for ApiError {
    fn from(e: EnclosureError) -> Self {
        Self::bad_request(e.to_string())
    }
}

type ApiResult = Result<Response, ApiError>;

struct Session {
    grammar: Arc<ShapeGrammar>,
    production: Production,
}

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    corpus: Vec<VoxelModel>,
}

impl AppState {
    pub fn new(corpus: Vec<VoxelModel>) -> Self {
        Self {
            sessions: RwLock::default(),
            corpus,
        }
    }

    async fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id}")))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/choices", get(get_choices))
        .route("/sessions/{id}/apply", post(apply))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/enclosure", post(enclosure))
        .route("/sessions/{id}/model", get(get_model))
        .route("/sessions/{id}/grammar", get(get_grammar))
        .route("/infer", post(infer))
        .route("/induce", post(induce))
        .route("/generate", post(generate))
        .route("/corpus", get(list_corpus))
        .route("/corpus/{name}", get(get_corpus_model))
        .route("/schemas/{name}", get(get_schema))
        .with_state(state)
}

/// Request bodies are parsed by hand so every malformed body is a 400.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request: {e}")))
}

fn parse_grammar(v: &Value) -> Result<ShapeGrammar, ApiError> {
    Ok(ShapeGrammar::from_json(v.to_string().as_bytes())?)
}

fn snapshot(id: &str, p: &Production) -> Value {
    json!({
        "id": id,
        "seed": p.seed(),
        "hash": p.hash(),
        "production": p,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    grammar: Value,
    #[serde(default)]
    initial: Option<u32>,
    #[serde(default)]
    seed: u64,
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: CreateSession = parse(&body)?;
    let g = parse_grammar(&req.grammar)?;
    let p = Production::start(&g, req.initial.map(ShapeId), req.seed)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let body = snapshot(&id, &p);
    let session = Session {
        grammar: Arc::new(g),
        production: p,
    };
    state.sessions.write().await.insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id).await?;
    let s = s.lock().await;
    Ok(Json(snapshot(&id, &s.production)).into_response())
}

async fn get_choices(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id).await?;
    let s = s.lock().await;
    let choices = s.production.step_choices(&s.grammar);
    Ok(Json(json!({ "hash": s.production.hash(), "choices": choices })).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyRequest {
    choice: usize,
}

async fn apply(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: ApplyRequest = parse(&body)?;
    let s = state.session(&id).await?;
    let mut s = s.lock().await;
    let g = Arc::clone(&s.grammar);
    let outcome = s.production.apply(&g, req.choice)?;
    let mut body = snapshot(&id, &s.production);
    body["applied"] = match outcome {
        Applied::Placed(k) => json!({ "placed": k }),
        Applied::Duplicate => json!("duplicate"),
    };
    Ok(Json(body).into_response())
}

async fn undo(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id).await?;
    let mut s = s.lock().await;
    let g = Arc::clone(&s.grammar);
    s.production.undo(&g)?;
    Ok(Json(snapshot(&id, &s.production)).into_response())
}

async fn enclosure(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id).await?;
    let mut s = s.lock().await;
    let report = s.production.enclose()?;
    let mut body = snapshot(&id, &s.production);
    body["removed"] = json!(report.removed());
    body["rounds"] = json!(report.rounds);
    Ok(Json(body).into_response())
}

async fn get_model(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id).await?;
    let s = s.lock().await;
    Ok(Json(s.production.to_model(&format!("session-{id}"))).into_response())
}

async fn get_grammar(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let s = state.session(&id).await?;
    let s = s.lock().await;
    Ok(Json(&*s.grammar).into_response())
}

fn default_alpha() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InferRequest {
    #[serde(default)]
    model: Option<Value>,
    /// Name of a corpus model, instead of `model`.
    #[serde(default)]
    corpus: Option<String>,
    #[serde(default)]
    spec: Option<ShapeSpec>,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default)]
    ops: Option<SearchOps>,
    #[serde(default)]
    overlap: bool,
    #[serde(default = "default_true")]
    plateau_merges: bool,
    #[serde(default)]
    max_steps: Option<usize>,
}

async fn infer(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: InferRequest = parse(&body)?;
    let model = match (&req.model, &req.corpus) {
        (Some(v), None) => VoxelModel::load_example(v.to_string().as_bytes())
            .map_err(|e| ApiError::bad_request(e.to_string()))?,
        (None, Some(name)) => state
            .corpus
            .iter()
            .find(|m| m.name() == name)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no corpus model {name}")))?,
        _ => return Err(ApiError::bad_request("give exactly one of model or corpus")),
    };
    let defaults = InferenceParams::default();
    let mut params = InferenceParams::new(
        req.spec.unwrap_or(defaults.spec),
        req.alpha,
        req.ops.unwrap_or(defaults.ops),
    )
    .with_overlap(req.overlap)
    .with_plateau_merges(req.plateau_merges);
    if let Some(n) = req.max_steps {
        params = params.with_max_steps(n);
    }
    let set = tokio::task::spawn_blocking(move || inference::hill_climb(&model, &params))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(set).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InduceRequest {
    shape_sets: Vec<Value>,
    #[serde(default)]
    initial: Option<u32>,
}

async fn induce(body: Bytes) -> ApiResult {
    let req: InduceRequest = parse(&body)?;
    let sets = req
        .shape_sets
        .iter()
        .map(|v| ShapeSet::from_json(v.to_string().as_bytes()))
        .collect::<Result<Vec<_>, _>>()?;
    let g = grammar::induce_with_initial(&sets, req.initial.map(ShapeId))?;
    Ok(Json(g).into_response())
}

fn default_max_steps() -> usize {
    50
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateRequest {
    grammar: Value,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_max_steps")]
    max_steps: usize,
    #[serde(default)]
    initial: Option<u32>,
    #[serde(default)]
    enclosure: bool,
    #[serde(default)]
    policy: ConflictPolicy,
}

async fn generate(body: Bytes) -> ApiResult {
    let req: GenerateRequest = parse(&body)?;
    let g = parse_grammar(&req.grammar)?;
    let mut p = production::generate_from(&g, req.initial.map(ShapeId), req.seed, req.max_steps, req.policy)?;
    let removed = if req.enclosure {
        Some(p.enclose()?.removed())
    } else {
        None
    };
    Ok(Json(json!({
        "seed": req.seed,
        "hash": p.hash(),
        "removed": removed,
        "production": p,
        "model": p.to_model(&format!("generated-{}", req.seed)),
    }))
    .into_response())
}

async fn list_corpus(State(state): State<Arc<AppState>>) -> ApiResult {
    let names: Vec<&str> = state.corpus.iter().map(|m| m.name()).collect();
    Ok(Json(json!({ "models": names })).into_response())
}

async fn get_corpus_model(State(state): State<Arc<AppState>>, Path(name): Path<String>) -> ApiResult {
    let m = state
        .corpus
        .iter()
        .find(|m| m.name() == name)
        .ok_or_else(|| ApiError::not_found(format!("no corpus model {name}")))?;
    Ok(Json(m).into_response())
}

async fn get_schema(Path(name): Path<String>) -> ApiResult {
    let text = schemas::by_name(&name).ok_or_else(|| ApiError::not_found(format!("no schema {name}")))?;
    let v: Value = serde_json::from_str(text).expect("bundled schemas are valid JSON");
    Ok(Json(v).into_response())
}
