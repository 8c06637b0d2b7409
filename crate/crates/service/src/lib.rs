//! HTTP facade over one immutable model. Handlers only parse, dispatch to
//! `riskbn_core::api` and serialize; no numbers are computed here.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

use riskbn_core::analytics::{render_risk_map, InfluenceReport, RenderFormat};
use riskbn_core::api::{InfluenceRequest, ModelSummary, QueryRequest, RiskMapRequest};
use riskbn_core::io::load_model;
use riskbn_core::model::BayesianNetwork;
use riskbn_core::params::ParameterPosterior;
use riskbn_core::Error;

/// Default cap on `rows × iterations` for influence requests answered inline.
pub const DEFAULT_INFLUENCE_BUDGET: usize = 10_000;

/// The loaded model. Never mutated after startup.
pub struct SessionModel {
    pub model_id: String,
    pub posterior: ParameterPosterior,
    pub network: BayesianNetwork,
    pub summary: ModelSummary,
}

impl SessionModel {
    pub fn new(posterior: ParameterPosterior) -> riskbn_core::Result<Self> {
        let summary = ModelSummary::of(&posterior)?;
        Ok(Self {
            model_id: summary.model_id.clone(),
            network: posterior.posterior_mean_network(),
            posterior,
            summary,
        })
    }

    pub fn from_document(text: &str) -> riskbn_core::Result<Self> {
        Self::new(load_model(text)?)
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub influence_budget: usize,
    /// `None` allows any origin.
    pub allowed_origins: Option<Vec<String>>,
    /// Static UI assets served under `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            influence_budget: DEFAULT_INFLUENCE_BUDGET,
            allowed_origins: None,
            static_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done { result: Box<InfluenceReport> },
    Failed { code: u16, error: String },
}

#[derive(Default)]
struct Jobs {
    next: AtomicU64,
    table: Mutex<HashMap<String, JobStatus>>,
}

impl Jobs {
    fn start(&self) -> String {
        let token = format!("job-{}", self.next.fetch_add(1, Ordering::Relaxed) + 1);
        self.table.lock().unwrap().insert(token.clone(), JobStatus::Running);
        token
    }

    fn finish(&self, token: &str, status: JobStatus) {
        self.table.lock().unwrap().insert(token.to_owned(), status);
    }

    fn get(&self, token: &str) -> Option<JobStatus> {
        self.table.lock().unwrap().get(token).cloned()
    }
}

#[derive(Clone)]
struct AppState {
    model: Option<Arc<SessionModel>>,
    jobs: Arc<Jobs>,
    influence_budget: usize,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::ImpossibleEvidence | Error::DegenerateBaseline { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "status": self.status.as_u16(), "error": self.message });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn model(state: &AppState) -> ApiResult<Arc<SessionModel>> {
    state
        .model
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no model loaded"))
}

/// Body parsing with 400 on any malformed or unexpected field.
fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed request: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> riskbn_core::Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

fn json_text(text: String) -> Response {
    ([(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], text).into_response()
}

async fn healthz(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "model_loaded": state.model.is_some() }))
}

async fn get_model(State(state): State<AppState>) -> ApiResult<Json<ModelSummary>> {
    Ok(Json(model(&state)?.summary.clone()))
}

async fn post_query(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let m = model(&state)?;
    let req: QueryRequest = parse(&body)?;
    Ok(Json(req.run(&m.network)?).into_response())
}

async fn post_riskmap(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let m = model(&state)?;
    let req: RiskMapRequest = parse(&body)?;
    // reject bad specs before spending a worker thread
    req.to_spec(m.posterior.schema())?;
    let text = blocking(move || render_risk_map(&req.run(&m.posterior)?, RenderFormat::Json)).await?;
    Ok(json_text(text))
}

async fn post_influence(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let m = model(&state)?;
    let req: InfluenceRequest = parse(&body)?;
    if req.workload() <= state.influence_budget {
        let report = blocking(move || req.run(&m.posterior)).await?;
        return Ok(Json(report).into_response());
    }
    let token = state.jobs.start();
    let jobs = state.jobs.clone();
    let t = token.clone();
    tokio::task::spawn_blocking(move || {
        let status = match req.run(&m.posterior) {
            Ok(r) => JobStatus::Done { result: Box::new(r) },
            Err(e) => {
                let e = ApiError::from(e);
                JobStatus::Failed {
                    code: e.status.as_u16(),
                    error: e.message,
                }
            }
        };
        jobs.finish(&t, status);
    });
    let body = json!({ "token": token, "status": "running", "poll": format!("/jobs/{token}") });
    Ok((StatusCode::ACCEPTED, Json(body)).into_response())
}

async fn get_job(State(state): State<AppState>, Path(token): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let status = state
        .jobs
        .get(&token)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown job `{token}`")))?;
    let mut v = serde_json::to_value(status).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    v["token"] = json!(token);
    Ok(Json(v))
}

fn cors(origins: &Option<Vec<String>>) -> CorsLayer {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE]);
    match origins {
        None => layer.allow_origin(Any),
        Some(list) => layer.allow_origin(AllowOrigin::list(
            list.iter().filter_map(|o| HeaderValue::from_str(o).ok()),
        )),
    }
}

pub fn router(model: Option<SessionModel>, config: &ServiceConfig) -> Router {
    let state = AppState {
        model: model.map(Arc::new),
        jobs: Arc::new(Jobs::default()),
        influence_budget: config.influence_budget,
    };
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/model", get(get_model))
        .route("/query", post(post_query))
        .route("/riskmap", post(post_riskmap))
        .route("/influence", post(post_influence))
        .route("/jobs/{token}", get(get_job))
        .with_state(state);
    let app = match &config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(cors(&config.allowed_origins))
}
