//! HTTP service exposing synthesis, induction, and program application.

use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pbe_core::dsl::{eval_program, format_program, parse_program, Vocabulary};
use pbe_core::generator::Example;
use pbe_core::model::Model;
use pbe_core::search::{induce, synthesize, InductionOptions, SelectionMetric, SynthesisOptions};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::catch_panic::CatchPanicLayer;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub const MAX_OBSERVED: usize = 10;
pub const MAX_UNPAIRED: usize = 50;
pub const MAX_STRING: usize = 256;
pub const MAX_BEAM: usize = 100;

/// A loaded model and a short hash identifying it.
pub struct LoadedModel {
    pub model: Model<f32>,
    pub hash: String,
}

/// Shared service state. Models are immutable once loaded; replacing one
/// swaps the `Arc` so in-flight requests keep the version they started with.
#[derive(Default)]
pub struct AppState {
    synthesis: RwLock<Option<Arc<LoadedModel>>>,
    induction: RwLock<Option<Arc<LoadedModel>>>,
}

impl AppState {
    pub fn new(synthesis: Option<LoadedModel>, induction: Option<LoadedModel>) -> Self {
        AppState { synthesis: RwLock::new(synthesis.map(Arc::new)), induction: RwLock::new(induction.map(Arc::new)) }
    }

    pub fn set_synthesis(&self, m: LoadedModel) {
        *self.synthesis.write().unwrap() = Some(Arc::new(m));
    }

    pub fn set_induction(&self, m: LoadedModel) {
        *self.induction.write().unwrap() = Some(Arc::new(m));
    }

    fn synthesis(&self) -> Option<Arc<LoadedModel>> {
        self.synthesis.read().unwrap().clone()
    }

    fn induction(&self) -> Option<Arc<LoadedModel>> {
        self.induction.read().unwrap().clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RequestMode {
    #[default]
    Synthesis,
    Induction,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RequestOptions {
    pub beam: usize,
    /// Defaults to on for exact selection and off for CER.
    pub dp: Option<bool>,
    pub metric: SelectionMetric,
    pub mode: RequestMode,
}

impl Default for RequestOptions {
    fn default() -> Self {
        RequestOptions { beam: 10, dp: None, metric: SelectionMetric::Exact, mode: RequestMode::Synthesis }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceRequest {
    pub observed: Vec<(String, String)>,
    #[serde(default)]
    pub unpaired_inputs: Vec<String>,
    #[serde(default)]
    pub options: RequestOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fill {
    pub input: String,
    pub output: Option<String>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceResponse {
    pub program_text: Option<String>,
    pub consistent: bool,
    pub fills: Vec<Fill>,
    pub candidates_considered: usize,
    pub latency_ms: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplyRequest {
    pub program_text: String,
    pub inputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApplyResponse {
    pub fills: Vec<Fill>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Errors a handler can return; none carries internal details.
#[derive(Debug)]
pub enum ApiError {
    Invalid(Vec<FieldError>),
    Unavailable(&'static str),
    Internal,
}

impl ApiError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> ApiError {
        ApiError::Invalid(vec![FieldError { field: field.into(), message: message.into() }])
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        match self {
            ApiError::Invalid(fields) => {
                (StatusCode::BAD_REQUEST, Json(json!({"error": "invalid request", "fields": fields}))).into_response()
            }
            ApiError::Unavailable(what) => {
                (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"error": format!("no {what} model loaded")})))
                    .into_response()
            }
            ApiError::Internal => internal_error(),
        }
    }
}

fn internal_error() -> Response {
    (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": "internal error"}))).into_response()
}

fn check_string(field: String, s: &str, allow_empty: bool, errors: &mut Vec<FieldError>) {
    let message = if s.len() > MAX_STRING || s.chars().count() > MAX_STRING {
        Some(format!("longer than {MAX_STRING} characters"))
    } else if !s.chars().all(|c| (' '..='~').contains(&c)) {
        Some("must be printable ASCII".to_string())
    } else if s.is_empty() && !allow_empty {
        Some("must not be empty".to_string())
    } else {
        None
    };
    if let Some(message) = message {
        errors.push(FieldError { field, message });
    }
}

/// Checks the request against the service limits.
pub fn validate_request(req: &ServiceRequest) -> Result<(), Vec<FieldError>> {
    let mut errors = Vec::new();
    if req.observed.is_empty() || req.observed.len() > MAX_OBSERVED {
        errors.push(FieldError {
            field: "observed".into(),
            message: format!("needs 1 to {MAX_OBSERVED} pairs, got {}", req.observed.len()),
        });
    }
    for (k, (i, o)) in req.observed.iter().enumerate() {
        check_string(format!("observed[{k}][0]"), i, false, &mut errors);
        check_string(format!("observed[{k}][1]"), o, false, &mut errors);
    }
    if req.unpaired_inputs.len() > MAX_UNPAIRED {
        errors.push(FieldError {
            field: "unpaired_inputs".into(),
            message: format!("at most {MAX_UNPAIRED} inputs, got {}", req.unpaired_inputs.len()),
        });
    }
    for (k, s) in req.unpaired_inputs.iter().enumerate() {
        check_string(format!("unpaired_inputs[{k}]"), s, true, &mut errors);
    }
    if req.options.beam == 0 || req.options.beam > MAX_BEAM {
        errors.push(FieldError { field: "options.beam".into(), message: format!("must be 1 to {MAX_BEAM}") });
    }
    if errors.is_empty() { Ok(()) } else { Err(errors) }
}

fn parse_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(b)| b).map_err(|e| ApiError::field("body", e.body_text()))
}

fn examples(req: &ServiceRequest) -> Vec<Example> {
    req.observed.iter().map(|(i, o)| Example::new(i.clone(), o.clone())).collect()
}

/// Runs CPU-bound work off the async executor.
async fn blocking<R: Send + 'static>(f: impl FnOnce() -> R + Send + 'static) -> Result<R, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|_| ApiError::Internal)
}

pub fn run_synthesis(m: &LoadedModel, req: &ServiceRequest) -> Result<ServiceResponse, ApiError> {
    let start = Instant::now();
    let opts = SynthesisOptions {
        beam: req.options.beam,
        dp: req.options.dp,
        metric: req.options.metric,
        ..SynthesisOptions::default()
    };
    let r = synthesize(&m.model, &examples(req), &req.unpaired_inputs, &opts).map_err(|_| ApiError::Internal)?;
    let fills = req
        .unpaired_inputs
        .iter()
        .enumerate()
        .map(|(k, input)| {
            let output = r.predictions.get(k).cloned().flatten();
            let error = match (&r.program, &output) {
                (None, _) => Some("no program".to_string()),
                (Some(p), None) => eval_program(p, input).err().map(|e| e.to_string()),
                _ => None,
            };
            Fill { input: input.clone(), output, error }
        })
        .collect();
    Ok(ServiceResponse {
        program_text: r.program.as_ref().map(format_program),
        consistent: r.consistent,
        fills,
        candidates_considered: r.candidates_tried,
        latency_ms: start.elapsed().as_secs_f64() * 1000.0,
    })
}

pub fn run_induction(m: &LoadedModel, req: &ServiceRequest) -> Result<ServiceResponse, ApiError> {
    let start = Instant::now();
    let observed = examples(req);
    let opts = InductionOptions { beam: req.options.beam, ..InductionOptions::default() };
    let fills = req
        .unpaired_inputs
        .iter()
        .map(|input| match induce(&m.model, &observed, std::slice::from_ref(input), &opts) {
            Ok(mut o) => Fill { input: input.clone(), output: o.pop(), error: None },
            Err(e) => Fill { input: input.clone(), output: None, error: Some(e.to_string()) },
        })
        .collect();
    Ok(ServiceResponse {
        program_text: None,
        consistent: false,
        fills,
        candidates_considered: 0,
        latency_ms: start.elapsed().as_secs_f64() * 1000.0,
    })
}

fn respond(resp: ServiceResponse, synthesis: bool) -> Response {
    // A synthesis response without a consistent program is a 422; the body
    // still carries whatever CER selection found.
    let status = if synthesis && !resp.consistent { StatusCode::UNPROCESSABLE_ENTITY } else { StatusCode::OK };
    (status, Json(resp)).into_response()
}

async fn synthesize_handler(
    State(state): State<Arc<AppState>>,
    body: Result<Json<ServiceRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = parse_body(body)?;
    validate_request(&req).map_err(ApiError::Invalid)?;
    if req.options.mode == RequestMode::Induction {
        return induce_inner(state, req).await;
    }
    let m = state.synthesis().ok_or(ApiError::Unavailable("synthesis"))?;
    let resp = blocking(move || run_synthesis(&m, &req)).await??;
    Ok(respond(resp, true))
}

async fn induce_inner(state: Arc<AppState>, req: ServiceRequest) -> Result<Response, ApiError> {
    let m = state.induction().ok_or(ApiError::Unavailable("induction"))?;
    let resp = blocking(move || run_induction(&m, &req)).await??;
    Ok(respond(resp, false))
}

async fn induce_handler(
    State(state): State<Arc<AppState>>,
    body: Result<Json<ServiceRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = parse_body(body)?;
    validate_request(&req).map_err(ApiError::Invalid)?;
    induce_inner(state, req).await
}

/// Parses `program_text` and runs it on each input.
pub fn apply_program(req: &ApplyRequest) -> Result<ApplyResponse, ApiError> {
    let mut errors = Vec::new();
    if req.inputs.len() > MAX_UNPAIRED {
        errors.push(FieldError { field: "inputs".into(), message: format!("at most {MAX_UNPAIRED} inputs") });
    }
    for (k, s) in req.inputs.iter().enumerate() {
        check_string(format!("inputs[{k}]"), s, true, &mut errors);
    }
    let program = match parse_program(&req.program_text) {
        Ok(p) => Some(p),
        Err(e) => {
            errors.push(FieldError { field: "program_text".into(), message: e.to_string() });
            None
        }
    };
    if !errors.is_empty() {
        return Err(ApiError::Invalid(errors));
    }
    let program = program.expect("parsed");
    let fills = req
        .inputs
        .iter()
        .map(|i| match eval_program(&program, i) {
            Ok(o) => Fill { input: i.clone(), output: Some(o), error: None },
            Err(e) => Fill { input: i.clone(), output: None, error: Some(e.to_string()) },
        })
        .collect();
    Ok(ApplyResponse { fills })
}

async fn apply_handler(body: Result<Json<ApplyRequest>, JsonRejection>) -> Result<Json<ApplyResponse>, ApiError> {
    let req = parse_body(body)?;
    apply_program(&req).map(Json)
}

async fn health_handler(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let hash = |m: Option<Arc<LoadedModel>>| m.map(|m| m.hash.clone());
    Json(json!({
        "status": "ok",
        "model": hash(state.synthesis()),
        "induction_model": hash(state.induction()),
    }))
}

async fn vocab_handler() -> Json<serde_json::Value> {
    let v = Vocabulary::get();
    let tokens: Vec<String> = v.tokens().iter().map(|t| t.name()).collect();
    Json(json!({"size": v.len(), "hash": v.hash(), "tokens": tokens}))
}

/// Builds the router. `origins` empty allows any origin.
pub fn router(state: Arc<AppState>, origins: &[String]) -> Router {
    let cors = if origins.is_empty() {
        CorsLayer::new().allow_origin(Any)
    } else {
        let list: Vec<HeaderValue> = origins.iter().filter_map(|o| o.parse().ok()).collect();
        CorsLayer::new().allow_origin(AllowOrigin::list(list))
    }
    .allow_methods(Any)
    .allow_headers(Any);
    Router::new()
        .route("/api/synthesize", post(synthesize_handler))
        .route("/api/induce", post(induce_handler))
        .route("/api/apply", post(apply_handler))
        .route("/api/health", get(health_handler))
        .route("/api/vocab", get(vocab_handler))
        .with_state(state)
        .layer(CatchPanicLayer::custom(|_| internal_error()))
        .layer(cors)
}
