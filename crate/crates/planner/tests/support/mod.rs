//! Drives the HTTP API with call sequences and checks every response against
//! a model of the session phase machine.
#![allow(dead_code)]

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mts_planner::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Call {
    Plan,
    Replan,
    ReplanEmpty,
    Start,
    Found,
    Result,
    GetPlan,
}

pub const CALLS: [Call; 7] = [
    Call::Plan,
    Call::Replan,
    Call::ReplanEmpty,
    Call::Start,
    Call::Found,
    Call::Result,
    Call::GetPlan,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Created,
    Planned,
    Replanned,
    Running,
    Finished,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Created => "created",
            Phase::Planned => "planned",
            Phase::Replanned => "replanned",
            Phase::Running => "running",
            Phase::Finished => "finished",
        }
    }
}

/// Expected outcome of `call` in `phase`: the next phase if it is legal.
fn model(phase: Phase, call: Call) -> Option<Phase> {
    use Phase::*;
    match (call, phase) {
        (Call::Plan, Created | Planned) => Some(Planned),
        (Call::Replan | Call::ReplanEmpty, Planned | Replanned) => Some(Replanned),
        (Call::Start, Planned | Replanned) => Some(Running),
        (Call::Found, Running) => Some(Finished),
        (Call::Result, Finished) => Some(Finished),
        (Call::GetPlan, p) if p != Created => Some(p),
        _ => None,
    }
}

pub fn fixture_scenario() -> Value {
    json!({
        "map": {"kind": "synthetic", "id": "m1", "resolution": 1.0},
        "prior": {"kind": "gaussian_mixture", "components": [
            {"center": [12, 12], "sigma": 4, "weight": 1},
            {"center": [28, 28], "sigma": 4, "weight": 1}
        ]},
        "agents": [
            {"id": 0, "start_position": [2, 2], "visibility_radius": 2.5, "speed": 1.0},
            {"id": 1, "start_position": [38, 38], "visibility_radius": 2.5, "speed": 1.0, "kind": "human"}
        ],
        "target": {"kind": "fixed", "cell": [20, 20]},
        "seed": 1
    })
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

/// Runs `calls` against a fresh session. Errors describe the first response
/// that disagrees with the model.
pub async fn run_sequence(calls: &[Call]) -> Result<(), String> {
    let app = router(AppState::new(ServiceConfig::default()));
    let (status, body) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"scenario": fixture_scenario(), "params": {"n_iterations": 3, "seed": 1}})),
    )
    .await;
    if status != StatusCode::CREATED {
        return Err(format!("create failed: {status} {body}"));
    }
    let s = format!("/sessions/{}", body["id"].as_str().unwrap());
    let areas = json!([
        {"x_min": 0, "y_min": 0, "x_max": 20, "y_max": 20, "owner": 0},
        {"x_min": 20, "y_min": 20, "x_max": 40, "y_max": 40, "owner": 1}
    ]);
    let mut phase = Phase::Created;
    for (i, &c) in calls.iter().enumerate() {
        let (method, path, body) = match c {
            Call::Plan => ("POST", "/plan", None),
            Call::Replan => ("POST", "/areas:replan", Some(json!({"areas": areas, "wait": true}))),
            Call::ReplanEmpty => ("POST", "/areas:replan", Some(json!({"areas": [], "wait": true}))),
            // A very slow clock keeps the run going until it is stopped.
            Call::Start => ("POST", "/start", Some(json!({"time_scale": 1e-4}))),
            Call::Found => ("POST", "/found", Some(json!({}))),
            Call::Result => ("GET", "/result", None),
            Call::GetPlan => ("GET", "/plan", None),
        };
        let (status, resp) = call(&app, method, &format!("{s}{path}"), body).await;
        match model(phase, c) {
            Some(next) if status.is_success() => phase = next,
            Some(_) => return Err(format!("step {i}: legal {c:?} in {phase:?} failed: {status} {resp}")),
            None if status.is_success() => {
                return Err(format!("step {i}: illegal {c:?} in {phase:?} succeeded"));
            }
            None => {
                let expected = if c == Call::GetPlan {
                    StatusCode::NOT_FOUND
                } else {
                    StatusCode::CONFLICT
                };
                if status != expected {
                    return Err(format!("step {i}: illegal {c:?} in {phase:?} gave {status} {resp}"));
                }
            }
        }
        let (_, st) = call(&app, "GET", &s, None).await;
        if st["phase"] != phase.name() {
            return Err(format!("step {i}: phase {} but model says {:?}", st["phase"], phase));
        }
    }
    Ok(())
}

/// The legal path create → plan → areas → replan → start → found, checking
/// the result of the run.
pub async fn happy_path() -> Result<Value, String> {
    let app = router(AppState::new(ServiceConfig::default()));
    let (_, body) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"scenario": fixture_scenario(), "params": {"n_iterations": 20, "seed": 2}})),
    )
    .await;
    let s = format!("/sessions/{}", body["id"].as_str().ok_or("no session id")?);
    let steps = [
        ("/plan", json!({})),
        (
            "/areas:replan",
            json!({"areas": [{"x_min": 0, "y_min": 0, "x_max": 20, "y_max": 20, "owner": 0}], "wait": true}),
        ),
        ("/start", json!({"time_scale": 1e-4})),
        ("/found", json!({"agent": 0})),
    ];
    let mut last = Value::Null;
    for (path, body) in steps {
        let (status, resp) = call(&app, "POST", &format!("{s}{path}"), Some(body)).await;
        if !status.is_success() {
            return Err(format!("{path}: {status} {resp}"));
        }
        last = resp;
    }
    let (status, result) = call(&app, "GET", &format!("{s}/result"), None).await;
    if status != StatusCode::OK || result != last {
        return Err(format!("result mismatch: {status} {result}"));
    }
    Ok(result)
}
