//! HTTP session service over the floor-plan engine.
//!
//! Each session holds one problem. Requests to a session are applied one at
//! a time in arrival order; sessions are independent of each other.

mod error;
mod session;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, OwnedMutexGuard, RwLock};
use toposketch::enumerate::{enumerate, EnumOptions, Progress};
use toposketch::io::{bundled_names, load_bundled, load_problem, IoError};
use toposketch::problem::CostSpec;

pub use error::{ApiError, ApiResult};
pub use session::*;

#[derive(Default)]
struct Inner {
    sessions: RwLock<HashMap<u64, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

/// Shared service state.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    async fn session(&self, id: u64) -> ApiResult<OwnedMutexGuard<Session>> {
        let s = self.inner.sessions.read().await.get(&id).cloned();
        let s = s.ok_or_else(|| ApiError::not_found(format!("no session {id}")))?;
        Ok(s.lock_owned().await)
    }

    async fn handle(&self, id: u64) -> ApiResult<Arc<Mutex<Session>>> {
        let s = self.inner.sessions.read().await.get(&id).cloned();
        s.ok_or_else(|| ApiError::not_found(format!("no session {id}")))
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    if body.is_empty() {
        return serde_json::from_str("{}").map_err(|e| ApiError::bad_request(format!("request body required: {e}")));
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request: {e}")))
}

/// Runs engine work on the blocking pool while holding the session lock.
async fn with_session<T: Send + 'static>(
    state: &AppState,
    id: u64,
    f: impl FnOnce(&mut Session) -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    let mut guard = state.session(id).await?;
    tokio::task::spawn_blocking(move || f(&mut guard))
        .await
        .map_err(|e| ApiError::engine(format!("engine task failed: {e}")))?
}

#[derive(Deserialize)]
struct CreateRequest {
    /// Name of a bundled benchmark.
    #[serde(default)]
    benchmark: Option<String>,
    /// Problem file text.
    #[serde(default)]
    problem: Option<String>,
}

#[derive(Serialize)]
struct BenchmarkList {
    benchmarks: Vec<&'static str>,
}

async fn list_benchmarks() -> Json<BenchmarkList> {
    Json(BenchmarkList { benchmarks: bundled_names() })
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let req: CreateRequest = parse(&body)?;
    let problem = match (req.benchmark, req.problem) {
        (Some(name), None) => load_bundled(&name).map_err(|e| match e {
            IoError::UnknownBenchmark(_) => ApiError::not_found(e.to_string()),
            other => ApiError::engine(other.to_string()),
        })?,
        (None, Some(text)) => load_problem(&text).map_err(|e| ApiError::validation(e.to_string()))?,
        _ => return Err(ApiError::bad_request("give exactly one of `benchmark` or `problem`")),
    };
    let id = state.inner.next_id.fetch_add(1, Ordering::Relaxed);
    let session = tokio::task::spawn_blocking(move || Session::new(id, problem))
        .await
        .map_err(|e| ApiError::engine(e.to_string()))?;
    let view = session.view();
    state.inner.sessions.write().await.insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<Json<SessionView>> {
    Ok(Json(state.session(id).await?.view()))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<StatusCode> {
    let removed = state.inner.sessions.write().await.remove(&id);
    let s = removed.ok_or_else(|| ApiError::not_found(format!("no session {id}")))?;
    for j in &s.lock().await.jobs {
        j.progress.cancel.store(true, Ordering::Relaxed);
    }
    Ok(StatusCode::NO_CONTENT)
}

async fn start_enumeration(
    State(state): State<AppState>,
    Path(id): Path<u64>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<JobView>)> {
    let req: EnumerateRequest = parse(&body)?;
    let handle = state.handle(id).await?;
    let mut s = handle.clone().lock_owned().await;
    if s.running() {
        return Err(ApiError::conflict("an enumeration is already running in this session"));
    }
    let progress = Arc::new(Progress::default());
    let job_id = s.jobs.len();
    s.jobs.push(Job {
        id: job_id,
        status: JobStatus::Running,
        progress: progress.clone(),
        started: Instant::now(),
        elapsed_ms: None,
        stats: None,
        error: None,
    });
    let model = s.model.clone();
    let view = s.job_view(job_id)?;
    drop(s);
    let opts = EnumOptions {
        witness: req.witness.unwrap_or_default(),
        max_topologies: req.max_topologies,
        progress: Some(progress),
        ..EnumOptions::default()
    };
    tokio::spawn(async move {
        let result = tokio::task::spawn_blocking(move || enumerate(&model, &opts)).await;
        let result = result.map_err(|e| format!("enumeration failed: {e}"));
        handle.lock().await.finish_job(job_id, result);
    });
    Ok((StatusCode::ACCEPTED, Json(view)))
}

async fn get_job(State(state): State<AppState>, Path((id, job)): Path<(u64, usize)>) -> ApiResult<Json<JobView>> {
    Ok(Json(state.session(id).await?.job_view(job)?))
}

async fn cancel_job(State(state): State<AppState>, Path((id, job)): Path<(u64, usize)>) -> ApiResult<Json<JobView>> {
    let s = state.session(id).await?;
    s.job(job)?.progress.cancel.store(true, Ordering::Relaxed);
    Ok(Json(s.job_view(job)?))
}

#[derive(Serialize)]
struct TopologyList {
    total: usize,
    topologies: Vec<TopologySummary>,
}

async fn list_topologies(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<Json<TopologyList>> {
    let s = state.session(id).await?;
    let e = s.enumeration()?;
    Ok(Json(TopologyList {
        total: e.topologies.len(),
        topologies: e
            .topologies
            .iter()
            .map(|t| TopologySummary { index: t.index, signature: t.signature.0.clone() })
            .collect(),
    }))
}

async fn get_topology(
    State(state): State<AppState>,
    Path((id, i)): Path<(u64, usize)>,
) -> ApiResult<Json<TopologyView>> {
    with_session(&state, id, move |s| s.topology_view(i)).await.map(Json)
}

fn svg_response(svg: String) -> Response {
    ([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response()
}

async fn get_sketch_svg(State(state): State<AppState>, Path((id, i)): Path<(u64, usize)>) -> ApiResult<Response> {
    let v = with_session(&state, id, move |s| s.topology_view(i)).await?;
    Ok(svg_response(v.sketch_svg))
}

#[derive(Deserialize)]
struct DiffQuery {
    a: usize,
    b: usize,
}

async fn get_diff(State(state): State<AppState>, Path(id): Path<u64>, Query(q): Query<DiffQuery>) -> ApiResult<Json<DiffView>> {
    with_session(&state, id, move |s| s.diff_view(q.a, q.b)).await.map(Json)
}

async fn post_filter(State(state): State<AppState>, Path(id): Path<u64>, body: Bytes) -> ApiResult<Json<FilterView>> {
    let req: FilterRequest = parse(&body)?;
    with_session(&state, id, move |s| s.filter(&req)).await.map(Json)
}

async fn get_refine(State(state): State<AppState>, Path((id, i)): Path<(u64, usize)>) -> ApiResult<Json<RefineView>> {
    with_session(&state, id, move |s| s.refine_state(i)).await.map(Json)
}

async fn post_refine(
    State(state): State<AppState>,
    Path((id, i)): Path<(u64, usize)>,
    body: Bytes,
) -> ApiResult<Json<RefineView>> {
    let req: RefineRequest = parse(&body)?;
    with_session(&state, id, move |s| s.refine(i, &req)).await.map(Json)
}

async fn post_undo(State(state): State<AppState>, Path((id, i)): Path<(u64, usize)>) -> ApiResult<Json<RefineView>> {
    with_session(&state, id, move |s| s.undo(i)).await.map(Json)
}

async fn get_cost(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<Json<CostView>> {
    let s = state.session(id).await?;
    Ok(Json(CostView { cost: s.cost.clone(), scale: s.model.cost.scale }))
}

async fn put_cost(State(state): State<AppState>, Path(id): Path<u64>, body: Bytes) -> ApiResult<Json<CostView>> {
    let cost: CostSpec = parse(&body)?;
    with_session(&state, id, move |s| Ok(s.set_cost(cost))).await.map(Json)
}

async fn post_optimize(
    State(state): State<AppState>,
    Path((id, i)): Path<(u64, usize)>,
    body: Bytes,
) -> ApiResult<Json<OptimizeView>> {
    let req: OptimizeRequest = parse(&body)?;
    with_session(&state, id, move |s| s.optimize(i, &req)).await.map(Json)
}

async fn post_rank(State(state): State<AppState>, Path(id): Path<u64>, body: Bytes) -> ApiResult<Json<RankView>> {
    let req: OptimizeRequest = parse(&body)?;
    with_session(&state, id, move |s| s.rank(&req)).await.map(Json)
}

async fn get_solutions(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<Response> {
    let f = with_session(&state, id, |s| s.solution_file()).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], f.to_json()).into_response())
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/benchmarks", get(list_benchmarks))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/enumerate", post(start_enumeration))
        .route("/sessions/{id}/jobs/{job}", get(get_job))
        .route("/sessions/{id}/jobs/{job}/cancel", post(cancel_job))
        .route("/sessions/{id}/topologies", get(list_topologies))
        .route("/sessions/{id}/topologies/{i}", get(get_topology))
        .route("/sessions/{id}/topologies/{i}/sketch.svg", get(get_sketch_svg))
        .route("/sessions/{id}/topologies/{i}/refine", get(get_refine).post(post_refine))
        .route("/sessions/{id}/topologies/{i}/undo", post(post_undo))
        .route("/sessions/{id}/topologies/{i}/optimize", post(post_optimize))
        .route("/sessions/{id}/diff", get(get_diff))
        .route("/sessions/{id}/filter", post(post_filter))
        .route("/sessions/{id}/cost", get(get_cost).put(put_cost))
        .route("/sessions/{id}/rank", post(post_rank))
        .route("/sessions/{id}/solutions", get(get_solutions))
        .fallback(fallback)
        .with_state(state)
}

/// Serves the API on `listener` until the process stops.
pub async fn serve(listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::new())).await
}
