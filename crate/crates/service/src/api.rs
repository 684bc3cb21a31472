//! JSON API under `/api/v1`, consumed by the annotation UI.
//!
//! | method | path                      |                                   |
//! |--------|---------------------------|-----------------------------------|
//! | GET    | `/health`                 |                                   |
//! | GET    | `/session/{annotator}/next-match` | next blinded match, or `null` |
//! | POST   | `/annotations`            | [`Submission`] → [`Ack`] (201)    |
//! | GET    | `/leaderboard?criterion=` | `query_type`, `genre`, `amendments` optional |
//! | GET    | `/iaa?criterion=&metric=` | `genre` optional                  |
//! | GET    | `/audio/{clip}`           | `audio/wav`                       |
//! | POST   | `/admin/schedule`         | [`ScheduleRequest`]               |
//!
//! Errors are `{"error": ..., "message": ...}` with 400, 404, 409 or 500.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use arena_core::agreement::{AgreementKind, KappaReport};
use arena_core::prompts::EvalQuery;
use arena_core::protocol::parse_query_filter;
use arena_core::ratings::AmendmentPolicy;
use arena_core::Criterion;

use crate::blind::{MatchView, Progress};
use crate::error::ServiceError;
use crate::schedule::ScheduleConfig;
use crate::store::{Ack, LeaderboardQuery, LeaderboardResponse, ScheduleOutcome, Store, Submission};

#[derive(Clone)]
pub struct AppState {
    store: Arc<Mutex<Store>>,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        Self { store: Arc::new(Mutex::new(store)) }
    }

    fn lock(&self) -> Result<MutexGuard<'_, Store>, ApiError> {
        self.store
            .lock()
            .map_err(|_| ApiError(ServiceError::Io(std::io::Error::other("store lock poisoned"))))
    }
}

pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(ServiceError::invalid(e.body_text()))
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError(ServiceError::invalid(e.body_text()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = match &self.0 {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            ServiceError::Validation(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
            ServiceError::Core(e) if e.is_validation() => (StatusCode::BAD_REQUEST, "invalid_request"),
            ServiceError::Core(_) | ServiceError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %self.0, "request failed");
        }
        (status, Json(ErrorBody { error: code.into(), message: self.0.to_string() })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parsed<T: std::str::FromStr<Err = arena_core::Error>>(s: &str) -> ApiResult<T> {
    s.parse().map_err(|e: arena_core::Error| ApiError(e.into()))
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.filter(|s| !s.trim().is_empty())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NextResponse {
    #[serde(rename = "match")]
    pub next: Option<MatchView>,
    pub progress: Progress,
}

#[derive(Debug, Deserialize)]
struct LeaderboardParams {
    criterion: String,
    query_type: Option<String>,
    genre: Option<String>,
    amendments: Option<String>,
}

#[derive(Debug, Deserialize)]
struct IaaParams {
    criterion: String,
    metric: Option<String>,
    genre: Option<String>,
}

/// Body of `POST /api/v1/admin/schedule`. Without `queries` the server reads
/// `queries.jsonl` from its data root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleRequest {
    pub config: ScheduleConfig,
    pub seed: u64,
    #[serde(default)]
    pub queries: Option<Vec<EvalQuery>>,
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn next(State(st): State<AppState>, Path(annotator): Path<String>) -> ApiResult<Json<NextResponse>> {
    let (next, progress) = st.lock()?.next_match(&annotator)?;
    Ok(Json(NextResponse { next, progress }))
}

async fn submit(
    State(st): State<AppState>,
    body: Result<Json<Submission>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Ack>)> {
    let Json(sub) = body?;
    let ack = st.lock()?.submit(&sub)?;
    Ok((StatusCode::CREATED, Json(ack)))
}

async fn leaderboard(
    State(st): State<AppState>,
    q: Result<Query<LeaderboardParams>, QueryRejection>,
) -> ApiResult<Json<LeaderboardResponse>> {
    let Query(q) = q?;
    let query = LeaderboardQuery {
        criterion: parsed::<Criterion>(&q.criterion)?,
        query_type: parse_query_filter(q.query_type.as_deref().unwrap_or("all")).map_err(ServiceError::from)?,
        genre: non_empty(q.genre),
        amendments: match q.amendments.as_deref() {
            None | Some("") => AmendmentPolicy::default(),
            Some(s) => parsed(s)?,
        },
    };
    Ok(Json(st.lock()?.leaderboard(&query)?))
}

async fn iaa(State(st): State<AppState>, q: Result<Query<IaaParams>, QueryRejection>) -> ApiResult<Json<KappaReport<f64>>> {
    let Query(q) = q?;
    let criterion = parsed::<Criterion>(&q.criterion)?;
    let kind = match q.metric.as_deref() {
        None | Some("") => AgreementKind::Distance,
        Some(s) => parsed(s)?,
    };
    let genre = non_empty(q.genre);
    Ok(Json(st.lock()?.iaa(criterion, kind, genre.as_deref())?))
}

async fn audio(State(st): State<AppState>, Path(clip): Path<String>) -> ApiResult<Response> {
    let path = st.lock()?.audio_path(&clip).ok_or_else(|| ServiceError::NotFound(format!("clip `{clip}`")))?;
    let bytes = match tokio::fs::read(&path).await {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ServiceError::NotFound(format!("audio for clip `{clip}`")).into())
        }
        Err(e) => return Err(ServiceError::Io(e).into()),
    };
    Ok(([(header::CONTENT_TYPE, "audio/wav"), (header::CACHE_CONTROL, "private, max-age=3600")], bytes).into_response())
}

async fn schedule(
    State(st): State<AppState>,
    body: Result<Json<ScheduleRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<ScheduleOutcome>)> {
    let Json(req) = body?;
    let mut store = st.lock()?;
    let queries = match req.queries {
        Some(q) => q,
        None => store.queries_on_disk()?,
    };
    let out = store.schedule(&req.config, &queries, req.seed)?;
    Ok((StatusCode::CREATED, Json(out)))
}

async fn api_not_found() -> ApiError {
    ApiError(ServiceError::NotFound("no such endpoint".into()))
}

/// API routes, plus the built UI as a static fallback when `ui_dir` is set.
pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/session/{annotator}/next-match", get(next))
        .route("/annotations", post(submit))
        .route("/leaderboard", get(leaderboard))
        .route("/iaa", get(iaa))
        .route("/audio/{clip}", get(audio))
        .route("/admin/schedule", post(schedule))
        .fallback(api_not_found)
        .with_state(state);
    let app = Router::new().nest("/api/v1", api);
    match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub data_dir: PathBuf,
    pub host: String,
    pub port: u16,
    pub ui_dir: Option<PathBuf>,
}

/// Binds and serves until the process is stopped. Returns the bound address
/// through `on_bind` first, which matters when `port` is 0.
pub async fn serve(cfg: ServeConfig, on_bind: impl FnOnce(SocketAddr)) -> Result<(), ServiceError> {
    let store = Store::open(&cfg.data_dir)?;
    let listener = tokio::net::TcpListener::bind((cfg.host.as_str(), cfg.port)).await?;
    let addr = listener.local_addr()?;
    on_bind(addr);
    tracing::info!(%addr, data_dir = %cfg.data_dir.display(), "serving");
    axum::serve(listener, router(AppState::new(store), cfg.ui_dir)).await?;
    Ok(())
}
