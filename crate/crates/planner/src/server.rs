//! HTTP routes over the session protocol.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use mts_core::aco::MmasParams;
use mts_core::geometry::Point;
use mts_core::grid_world::{AgentProfile, PreferredArea};
use mts_core::sim::{generate_scenario, ScenarioSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::error::ApiError;
use crate::session::{compute_plan, Event, EventBody, JobStatus, Phase, PlanView, Session, StartRequest};

/// Service settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// Optimizer settings used when a request does not give its own.
    pub default_params: MmasParams,
    /// Origins allowed to call the API from a browser; `*` allows any.
    pub cors_origins: Vec<String>,
    /// Where snapshots are written; `None` returns them without writing.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            default_params: MmasParams::default(),
            cors_origins: Vec::new(),
            snapshot_dir: None,
        }
    }
}

type SessionRef = Arc<Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, SessionRef>>>,
    config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState {
            sessions: Arc::default(),
            config: Arc::new(config),
        }
    }

    fn session(&self, id: &str) -> Result<SessionRef, ApiError> {
        self.sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session"))
    }
}

fn lock(s: &SessionRef) -> std::sync::MutexGuard<'_, Session> {
    s.lock().expect("session poisoned")
}

pub fn router(state: AppState) -> Router {
    let cors = cors_layer(&state.config.cors_origins);
    let app = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/map", get(get_map))
        .route("/sessions/{id}/prior", get(get_prior))
        .route("/sessions/{id}/plan", post(post_plan).get(get_plan))
        .route("/sessions/{id}/areas:replan", post(post_replan))
        .route("/sessions/{id}/start", post(post_start))
        .route("/sessions/{id}/found", post(post_found))
        .route("/sessions/{id}/events", get(get_events))
        .route("/sessions/{id}/result", get(get_result))
        .route("/sessions/{id}/snapshot", post(post_snapshot))
        .with_state(state);
    match cors {
        Some(layer) => app.layer(layer),
        None => app,
    }
}

fn cors_layer(origins: &[String]) -> Option<CorsLayer> {
    if origins.is_empty() {
        return None;
    }
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::from(Any)
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    Some(CorsLayer::new().allow_origin(allow).allow_methods(Any).allow_headers(Any))
}

/// Parses a JSON body; an empty body means the default value.
fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(e.to_string()))
}

#[derive(Deserialize)]
struct CreateRequest {
    scenario: ScenarioSpec,
    #[serde(default)]
    params: Option<MmasParams>,
}

#[derive(Serialize)]
struct SessionStatus {
    id: String,
    phase: Phase,
    job: JobStatus,
    areas: Vec<PreferredArea>,
    has_plan: bool,
    dt: f64,
    events: usize,
}

fn status(s: &Session) -> SessionStatus {
    SessionStatus {
        id: s.id.clone(),
        phase: s.phase,
        job: s.job.clone(),
        areas: s.areas.clone(),
        has_plan: s.plan.is_some(),
        dt: s.scenario.dt,
        events: s.event_count(),
    }
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = serde_json::from_slice(&body).map_err(|e| ApiError::invalid(e.to_string()))?;
    let params = req.params.unwrap_or_else(|| state.config.default_params.clone());
    params.validate().map_err(ApiError::from)?;
    let spec = req.scenario;
    let (scenario, problem) = tokio::task::spawn_blocking(move || {
        let scenario = generate_scenario(&spec)?;
        let problem = scenario.problem()?;
        Ok::<_, mts_core::Error>((scenario, problem))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::new(id.clone(), scenario, problem, params);
    let body = status(&session);
    state
        .sessions
        .write()
        .expect("session table poisoned")
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionStatus>, ApiError> {
    let s = state.session(&id)?;
    let s = lock(&s);
    Ok(Json(status(&s)))
}

#[derive(Serialize)]
struct MapView {
    width: usize,
    height: usize,
    resolution: f64,
    class_names: Vec<String>,
    classes: Vec<u8>,
    occupied: Vec<bool>,
    agents: Vec<AgentProfile>,
    nodes: Vec<Point>,
}

async fn get_map(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<MapView>, ApiError> {
    let s = state.session(&id)?;
    let scenario = lock(&s).scenario.clone();
    let map = &scenario.map;
    Ok(Json(MapView {
        width: map.shape.width,
        height: map.shape.height,
        resolution: map.shape.resolution,
        class_names: map.class_names.clone(),
        classes: map.classes.clone(),
        occupied: scenario.occupancy.occupied.clone(),
        agents: scenario.profiles.clone(),
        nodes: scenario.graph.nodes.iter().map(|n| n.position).collect(),
    }))
}

async fn get_prior(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = state.session(&id)?;
    let scenario = lock(&s).scenario.clone();
    Ok(Json(&scenario.prior).into_response())
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct PlanRequest {
    params: Option<MmasParams>,
}

async fn post_plan(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<PlanView>, ApiError> {
    let req: PlanRequest = parse_body(&body)?;
    let s = state.session(&id)?;
    let (problem, belief, params) = {
        let mut g = lock(&s);
        let params = req.params.unwrap_or_else(|| g.params.clone());
        params.validate().map_err(ApiError::from)?;
        let belief = g.belief_for(&[])?;
        g.begin_plan()?;
        (g.problem.clone(), belief, params)
    };
    let result = tokio::task::spawn_blocking(move || compute_plan(&problem, &belief, &params, &[]))
        .await
        .unwrap_or_else(|e| Err(ApiError::internal(e.to_string())));
    let view = lock(&s).complete_plan(result)?;
    Ok(Json(view))
}

async fn get_plan(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<PlanView>, ApiError> {
    let s = state.session(&id)?;
    let plan = lock(&s).plan.clone();
    plan.map(Json).ok_or_else(|| ApiError::not_found("plan"))
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct ReplanRequest {
    areas: Vec<PreferredArea>,
    params: Option<MmasParams>,
    /// Block until the new plan is ready.
    wait: bool,
}

#[derive(Serialize)]
struct ReplanResponse {
    #[serde(flatten)]
    plan: PlanView,
    /// Considered-areas percent of the first plan under the same areas.
    previous_percent_considered_areas: Option<f64>,
}

async fn post_replan(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: ReplanRequest = parse_body(&body)?;
    let s = state.session(&id)?;
    let (problem, belief, params, areas, before) = {
        let mut g = lock(&s);
        let params = req.params.unwrap_or_else(|| g.params.clone());
        params.validate().map_err(ApiError::from)?;
        let belief = g.begin_replan(req.areas.clone())?;
        let before = g
            .first_plan
            .as_ref()
            .map(|p| mts_core::sim::percent_considered_areas(&p.plan.polylines, &req.areas));
        (g.problem.clone(), belief, params, req.areas, before)
    };
    let job_session = s.clone();
    let job = tokio::spawn(async move {
        let result = tokio::task::spawn_blocking(move || compute_plan(&problem, &belief, &params, &areas))
            .await
            .unwrap_or_else(|e| Err(ApiError::internal(e.to_string())));
        lock(&job_session).complete_replan(result)
    });
    if !req.wait {
        return Ok((StatusCode::ACCEPTED, Json(json!({"job": {"state": "running"}, "phase": Phase::AreasSubmitted}))).into_response());
    }
    let plan = job.await.map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(ReplanResponse {
        plan,
        previous_percent_considered_areas: before,
    })
    .into_response())
}

async fn post_start(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    let req: StartRequest = parse_body(&body)?;
    let s = state.session(&id)?;
    let (tick, pause) = lock(&s).start(&req)?;
    let runner = s.clone();
    tokio::spawn(async move {
        let pause = Duration::from_secs_f64(pause);
        loop {
            if !lock(&runner).tick() {
                break;
            }
            if pause.is_zero() {
                tokio::task::yield_now().await;
            } else {
                tokio::time::sleep(pause).await;
            }
        }
    });
    Ok(Json(json!({"phase": Phase::Running, "tick": tick})))
}

#[derive(Default, Deserialize)]
#[serde(default)]
struct FoundRequest {
    agent: Option<usize>,
}

async fn post_found(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: FoundRequest = parse_body(&body)?;
    let s = state.session(&id)?;
    let result = lock(&s).report_found(req.agent)?;
    Ok(Json(result).into_response())
}

async fn get_result(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = state.session(&id)?;
    let g = lock(&s);
    match (&g.result, g.phase) {
        (Some(r), Phase::Finished) => Ok(Json(r).into_response()),
        _ => Err(ApiError::protocol("the run has not finished".into(), g.phase)),
    }
}

async fn post_snapshot(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = state.session(&id)?;
    let snap = lock(&s).snapshot();
    let mut path = None;
    if let Some(dir) = &state.config.snapshot_dir {
        let file = dir.join(format!("{id}.json"));
        let text = serde_json::to_vec_pretty(&snap).map_err(|e| ApiError::internal(e.to_string()))?;
        std::fs::create_dir_all(dir)
            .and_then(|_| std::fs::write(&file, text))
            .map_err(|e| ApiError::internal(format!("{}: {e}", file.display())))?;
        path = Some(file);
    }
    Ok(Json(json!({"path": path, "snapshot": snap})).into_response())
}

#[derive(Deserialize)]
struct EventsQuery {
    after: Option<u64>,
}

/// Server-sent events. Replays the session history after `after` (or the
/// `Last-Event-ID` header), then follows live events until the session
/// finishes.
async fn get_events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, ApiError> {
    let after = q.after.or_else(|| {
        headers
            .get("last-event-id")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok())
    });
    let s = state.session(&id)?;
    let (past, rx) = lock(&s).subscribe(after.unwrap_or(0));
    let last = past.last().map_or(after.unwrap_or(0), |e| e.seq);
    let done = past.iter().any(closes_stream);
    let live = stream::unfold((rx, last, done), |(mut rx, last, done)| async move {
        if done {
            return None;
        }
        loop {
            match rx.recv().await {
                Ok(e) if e.seq <= last => continue,
                Ok(e) => {
                    let (seq, close) = (e.seq, closes_stream(&e));
                    return Some((e, (rx, seq, close)));
                }
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return None,
            }
        }
    });
    let events = stream::iter(past).chain(live).map(|e| {
        Ok(SseEvent::default()
            .id(e.seq.to_string())
            .event(e.body.name())
            .json_data(&e)
            .unwrap_or_else(|_| SseEvent::default().comment("unserializable event")))
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

fn closes_stream(e: &Event) -> bool {
    matches!(e.body, EventBody::Phase { phase: Phase::Finished })
}

/// Binds and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let addr = format!("{}:{}", config.host, config.port);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    let app = router(AppState::new(config));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
