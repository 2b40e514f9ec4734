//! HTTP/JSON service over one immutable checkpoint.
//!
//! Token surfaces, not ids, cross the wire. Validation failures are 400
//! with per-field messages, tokens unknown to the loaded vocabulary are
//! 422, and every model route answers 503 until the checkpoint is loaded.

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use anticipation_core::diagnostics::{divergence_trace, DivergenceKind};
use anticipation_core::sampler::generate;
use anticipation_core::{Checkpoint, ConstraintSet, EnforceMode, Error as CoreError};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::checkpoint::ConfigJson;

pub const MAX_LENGTH: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintJson {
    pub pos: i64,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    #[serde(default)]
    pub constraints: Vec<ConstraintJson>,
    pub length: i64,
    #[serde(default = "one")]
    pub temperature: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub mode: Option<String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub tokens: Vec<String>,
    pub satisfied: Vec<bool>,
    pub entropies: Vec<f64>,
    pub constraint_calls: usize,
    pub token_calls: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRequest {
    #[serde(default)]
    pub constraints: Vec<ConstraintJson>,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub divergence: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResponse {
    pub divergence: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub fields: Vec<FieldError>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            fields: Vec::new(),
        }
    }

    fn fields(status: StatusCode, fields: Vec<FieldError>) -> Self {
        let message = if status == StatusCode::UNPROCESSABLE_ENTITY {
            "token not in the model vocabulary"
        } else {
            "validation failed"
        };
        Self {
            status,
            message: message.into(),
            fields,
        }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.message, "fields": self.fields });
        (self.status, Json(body)).into_response()
    }
}

fn field(field: impl Into<String>, message: impl Into<String>) -> FieldError {
    FieldError {
        field: field.into(),
        message: message.into(),
    }
}

/// Shared handle to the checkpoint, empty while it is loading.
#[derive(Clone, Default)]
pub struct AppState {
    checkpoint: Arc<OnceLock<Arc<Checkpoint>>>,
}

impl AppState {
    pub fn loading() -> Self {
        Self::default()
    }

    pub fn ready(checkpoint: Checkpoint) -> Self {
        let s = Self::default();
        s.install(checkpoint);
        s
    }

    /// Publishes the checkpoint; later calls are ignored.
    pub fn install(&self, checkpoint: Checkpoint) -> bool {
        self.checkpoint.set(Arc::new(checkpoint)).is_ok()
    }

    fn get(&self) -> Result<Arc<Checkpoint>, ApiError> {
        self.checkpoint
            .get()
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "model is loading"))
    }
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/api/model", get(model_info))
        .route("/api/generate", post(generate_route))
        .route("/api/trace", post(trace_route))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        let mut err = ApiError::new(StatusCode::BAD_REQUEST, "malformed request body");
        err.fields.push(field("body", e.to_string()));
        err
    })
}

async fn healthz(State(state): State<AppState>) -> Response {
    match state.get() {
        Ok(_) => Json(json!({ "status": "ok" })).into_response(),
        Err(_) => (StatusCode::SERVICE_UNAVAILABLE, Json(json!({ "status": "loading" }))).into_response(),
    }
}

async fn model_info(State(state): State<AppState>) -> Result<Json<serde_json::Value>, ApiError> {
    let cp = state.get()?;
    let v = &cp.vocabulary;
    let notes: Vec<String> = v
        .alphabet()
        .into_iter()
        .filter(|&id| id != v.hold())
        .map(|id| v.surface(id))
        .collect();
    Ok(Json(json!({
        "vocabulary": v.surfaces(),
        "notes": notes,
        "hold": v.surface(v.hold()),
        "config": ConfigJson::from(cp.config()),
        "limits": { "min_length": 1, "max_length": MAX_LENGTH },
    })))
}

/// Checks positions and tokens; position problems are 400, unknown tokens
/// 422.
fn constraint_set(cp: &Checkpoint, constraints: &[ConstraintJson], length: usize) -> Result<ConstraintSet, ApiError> {
    let v = &cp.vocabulary;
    let mut bad = Vec::new();
    let mut unknown = Vec::new();
    let mut pairs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, c) in constraints.iter().enumerate() {
        if c.pos < 1 || c.pos as u64 > length as u64 {
            bad.push(field(
                format!("constraints[{i}].pos"),
                format!("position {} outside 1..={length}", c.pos),
            ));
        } else if !seen.insert(c.pos) {
            bad.push(field(format!("constraints[{i}].pos"), format!("position {} constrained twice", c.pos)));
        }
        match v.lookup(&c.token) {
            Ok(id) if v.is_special(id) => bad.push(field(
                format!("constraints[{i}].token"),
                format!("`{}` cannot be a constraint", c.token),
            )),
            Ok(id) => pairs.push((c.pos as usize, id)),
            Err(_) => unknown.push(field(format!("constraints[{i}].token"), format!("unknown token `{}`", c.token))),
        }
    }
    if !bad.is_empty() {
        return Err(ApiError::fields(StatusCode::BAD_REQUEST, bad));
    }
    if !unknown.is_empty() {
        return Err(ApiError::fields(StatusCode::UNPROCESSABLE_ENTITY, unknown));
    }
    ConstraintSet::new(length, pairs, v).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))
}

fn check_length(length: i64, fields: &mut Vec<FieldError>, name: &str) -> usize {
    if length < 1 || length as u64 > MAX_LENGTH as u64 {
        fields.push(field(name, format!("length must lie in 1..={MAX_LENGTH}")));
        return 0;
    }
    length as usize
}

/// Validates and runs one generation. Exposed for in-process use.
pub fn run_generate(cp: &Checkpoint, req: &GenerateRequest) -> Result<GenerateResponse, ApiError> {
    let mut fields = Vec::new();
    let length = check_length(req.length, &mut fields, "length");
    if !(req.temperature > 0.0 && req.temperature.is_finite()) {
        fields.push(field("temperature", "temperature must be positive"));
    }
    let mode = match req.mode.as_deref().map(str::parse::<EnforceMode>) {
        None => EnforceMode::Learned,
        Some(Ok(m)) => m,
        Some(Err(_)) => {
            fields.push(field("mode", "mode must be `learned` or `clamped`"));
            EnforceMode::Learned
        }
    };
    if !fields.is_empty() {
        return Err(ApiError::fields(StatusCode::BAD_REQUEST, fields));
    }
    let cs = constraint_set(cp, &req.constraints, length)?;
    let seed = req.seed.unwrap_or_else(rand::random);
    let rec = generate(cp, &cs, req.temperature, seed, mode).map_err(ApiError::internal)?;
    Ok(GenerateResponse {
        tokens: rec.sequence.iter().map(|&id| cp.vocabulary.surface(id)).collect(),
        satisfied: cs.satisfied_flags(&rec.sequence),
        entropies: rec.distributions.iter().map(|d| d.entropy()).collect(),
        constraint_calls: rec.constraint_calls,
        token_calls: rec.token_calls,
        seed,
    })
}

pub fn run_trace(cp: &Checkpoint, req: &TraceRequest) -> Result<TraceResponse, ApiError> {
    let mut fields = Vec::new();
    let length = check_length(req.tokens.len() as i64, &mut fields, "tokens");
    let kind = match req.divergence.as_deref() {
        None => DivergenceKind::ReversedKullbackLeibler,
        Some(s) => s.parse().unwrap_or_else(|_| {
            fields.push(field("divergence", "expected kl, reversed-kl, jeffreys or js"));
            DivergenceKind::ReversedKullbackLeibler
        }),
    };
    if !fields.is_empty() {
        return Err(ApiError::fields(StatusCode::BAD_REQUEST, fields));
    }
    let cs = constraint_set(cp, &req.constraints, length)?;
    let mut seq = Vec::with_capacity(length);
    let mut unknown = Vec::new();
    for (i, t) in req.tokens.iter().enumerate() {
        match cp.vocabulary.lookup(t) {
            Ok(id) => seq.push(id),
            Err(_) => unknown.push(field(format!("tokens[{i}]"), format!("unknown token `{t}`"))),
        }
    }
    if !unknown.is_empty() {
        return Err(ApiError::fields(StatusCode::UNPROCESSABLE_ENTITY, unknown));
    }
    let values = divergence_trace(cp, &cs, &seq, kind).map_err(|e| match e {
        CoreError::InvalidInput(m) => ApiError::new(StatusCode::BAD_REQUEST, m),
        other => ApiError::internal(other),
    })?;
    Ok(TraceResponse {
        divergence: kind.as_str().to_string(),
        values,
    })
}

async fn generate_route(State(state): State<AppState>, body: Bytes) -> Result<Json<GenerateResponse>, ApiError> {
    let cp = state.get()?;
    let req: GenerateRequest = parse_body(&body)?;
    tokio::task::spawn_blocking(move || run_generate(&cp, &req))
        .await
        .map_err(ApiError::internal)?
        .map(Json)
}

async fn trace_route(State(state): State<AppState>, body: Bytes) -> Result<Json<TraceResponse>, ApiError> {
    let cp = state.get()?;
    let req: TraceRequest = parse_body(&body)?;
    tokio::task::spawn_blocking(move || run_trace(&cp, &req))
        .await
        .map_err(ApiError::internal)?
        .map(Json)
}
