use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mts_planner::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

fn scenario(map: &str, target: (usize, usize)) -> Value {
    json!({
        "map": {"kind": "synthetic", "id": map, "resolution": 1.0},
        "prior": {"kind": "gaussian_mixture", "components": [
            {"center": [12, 12], "sigma": 4, "weight": 1},
            {"center": [28, 28], "sigma": 4, "weight": 1}
        ]},
        "agents": [
            {"id": 0, "start_position": [2, 2], "visibility_radius": 2.5, "speed": 1.0},
            {"id": 1, "start_position": [38, 38], "visibility_radius": 2.5, "speed": 1.0, "kind": "human"}
        ],
        "target": {"kind": "fixed", "cell": [target.0, target.1]},
        "seed": 1
    })
}

fn app() -> Router {
    router(AppState::new(ServiceConfig::default()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn create(app: &Router, map: &str) -> String {
    let (status, body) = call(
        app,
        "POST",
        "/sessions",
        Some(json!({"scenario": scenario(map, (15, 25)), "params": {"n_iterations": 10, "seed": 3}})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["phase"], "created");
    body["id"].as_str().unwrap().to_string()
}

fn split_areas() -> Value {
    json!([
        {"x_min": 0, "y_min": 0, "x_max": 20, "y_max": 20, "owner": 0},
        {"x_min": 20, "y_min": 20, "x_max": 40, "y_max": 40, "owner": 1}
    ])
}

#[tokio::test]
async fn happy_path_with_found_button() {
    let app = app();
    let id = create(&app, "m1").await;
    let s = format!("/sessions/{id}");

    let (status, plan) = call(&app, "POST", &format!("{s}/plan"), None).await;
    assert_eq!(status, StatusCode::OK, "{plan}");
    assert!(plan["residual"].as_f64().unwrap() <= 0.014);
    assert_eq!(plan["paths"].as_array().unwrap().len(), 2);

    let (status, replan) = call(
        &app,
        "POST",
        &format!("{s}/areas:replan"),
        Some(json!({"areas": split_areas(), "wait": true})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{replan}");
    let after = replan["percent_considered_areas"].as_f64().unwrap();
    let before = replan["previous_percent_considered_areas"].as_f64().unwrap();
    assert!(after >= before, "{after} < {before}");

    let (status, _) = call(&app, "POST", &format!("{s}/start"), Some(json!({"time_scale": 1e-3}))).await;
    assert_eq!(status, StatusCode::OK);
    let (_, status_body) = call(&app, "GET", &s, None).await;
    assert_eq!(status_body["phase"], "running");

    let (status, result) = call(&app, "POST", &format!("{s}/found"), Some(json!({"agent": 1}))).await;
    assert_eq!(status, StatusCode::OK, "{result}");
    assert_eq!(result["terminal"], "human_found_reported");
    assert_eq!(result["found_by"], 1);

    let (status, stored) = call(&app, "GET", &format!("{s}/result"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stored, result);
    let (status, _) = call(&app, "POST", &format!("{s}/found"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn event_stream_replays_a_finished_run() {
    let app = app();
    let id = create(&app, "m1").await;
    let s = format!("/sessions/{id}");
    call(&app, "POST", &format!("{s}/plan"), None).await;
    let (status, _) = call(&app, "POST", &format!("{s}/start"), Some(json!({"time_scale": 0}))).await;
    assert_eq!(status, StatusCode::OK);
    let mut phase = Value::Null;
    for _ in 0..500 {
        phase = call(&app, "GET", &s, None).await.1["phase"].clone();
        if phase == "finished" {
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(10)).await;
    }
    assert_eq!(phase, "finished");

    let req = Request::get(format!("{s}/events")).body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let text = String::from_utf8(resp.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap();
    let events: Vec<Value> = text
        .lines()
        .filter_map(|l| l.strip_prefix("data: "))
        .map(|d| serde_json::from_str(d).unwrap())
        .collect();
    let seqs: Vec<u64> = events.iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1));
    let cumulative: Vec<f64> = events
        .iter()
        .filter(|e| e["type"] == "state")
        .map(|e| e["cumulative_probability"].as_f64().unwrap())
        .collect();
    assert!(!cumulative.is_empty());
    assert!(cumulative.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(cumulative.iter().all(|&c| (0.0..=1.0 + 1e-9).contains(&c)));
    let terminals: Vec<&Value> = events
        .iter()
        .filter(|e| ["robot_found", "human_found_reported", "not_found"].contains(&e["type"].as_str().unwrap()))
        .collect();
    assert_eq!(terminals.len(), 1);
    assert_eq!(events.last().unwrap()["phase"], "finished");

    // Resuming after an id skips what the client already has.
    let after = seqs[seqs.len() - 3];
    let req = Request::get(format!("{s}/events?after={after}")).body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let text = String::from_utf8(resp.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("data: ")).count(), 2);
}

#[tokio::test]
async fn empty_areas_reproduce_the_first_plan() {
    let app = app();
    let id = create(&app, "m1").await;
    let s = format!("/sessions/{id}");
    let (_, first) = call(&app, "POST", &format!("{s}/plan"), None).await;
    let (status, again) = call(
        &app,
        "POST",
        &format!("{s}/areas:replan"),
        Some(json!({"areas": [], "wait": true})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first["paths"], again["paths"]);
    assert_eq!(first["est"], again["est"]);
}

#[tokio::test]
async fn area_without_mass_is_rejected_with_a_hint() {
    let app = app();
    let id = create(&app, "m2").await;
    let s = format!("/sessions/{id}");
    call(&app, "POST", &format!("{s}/plan"), None).await;
    // Agent 0 only drew inside a building, agent 1 claimed everything else.
    let areas = json!([
        {"x_min": 7, "y_min": 29, "x_max": 11, "y_max": 33, "owner": 0},
        {"x_min": 0, "y_min": 0, "x_max": 40, "y_max": 40, "owner": 1}
    ]);
    let (status, body) = call(&app, "POST", &format!("{s}/areas:replan"), Some(json!({"areas": areas}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["error"], "empty_sub_prior");
    assert!(body["hint"].as_str().unwrap().contains("preferred areas"));
    let (_, st) = call(&app, "GET", &s, None).await;
    assert_eq!(st["phase"], "planned");
}

#[tokio::test]
async fn background_replan_reports_job_state() {
    let app = app();
    let id = create(&app, "m1").await;
    let s = format!("/sessions/{id}");
    call(&app, "POST", &format!("{s}/plan"), None).await;
    let (status, body) = call(&app, "POST", &format!("{s}/areas:replan"), Some(json!({"areas": split_areas()}))).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{body}");
    let mut st = Value::Null;
    for _ in 0..500 {
        st = call(&app, "GET", &s, None).await.1;
        if st["job"]["state"] != "running" {
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(10)).await;
    }
    assert_eq!(st["job"]["state"], "done");
    assert_eq!(st["phase"], "replanned");
    let (status, plan) = call(&app, "GET", &format!("{s}/plan"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(plan["percent_considered_areas"].as_f64().unwrap() > 0.0);
}

#[tokio::test]
async fn bad_requests_are_reported() {
    let app = app();
    let (status, body) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "not_found");
    let (status, body) = call(&app, "POST", "/sessions", Some(json!({"scenario": {"map": 3}}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "invalid_request");

    let id = create(&app, "m1").await;
    let s = format!("/sessions/{id}");
    let (status, body) = call(&app, "POST", &format!("{s}/start"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "protocol");
    assert_eq!(body["phase"], "created");
    let (status, _) = call(&app, "GET", &format!("{s}/result"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, map) = call(&app, "GET", &format!("{s}/map"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(map["width"], 40);
    assert_eq!(map["class_names"].as_array().unwrap().len(), 14);
    let (status, prior) = call(&app, "GET", &format!("{s}/prior"), None).await;
    assert_eq!(status, StatusCode::OK);
    let total: f64 = prior["mass"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[tokio::test]
async fn snapshot_is_written_when_configured() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::new(ServiceConfig {
        snapshot_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    }));
    let id = create(&app, "m1").await;
    call(&app, "POST", &format!("/sessions/{id}/plan"), None).await;
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/snapshot"), None).await;
    assert_eq!(status, StatusCode::OK);
    let path = body["path"].as_str().unwrap();
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(saved["phase"], "planned");
    assert_eq!(saved["plan"], body["snapshot"]["plan"]);
}

#[tokio::test]
async fn cors_allows_the_console_origin() {
    let app = router(AppState::new(ServiceConfig {
        cors_origins: vec!["http://localhost:5173".into()],
        ..ServiceConfig::default()
    }));
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/sessions")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "http://localhost:5173");
}
