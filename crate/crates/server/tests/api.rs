use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use inspectkit_core::advisor::DesiredRangeTable;
use inspectkit_core::dataset::ProjectDataset;
use inspectkit_server::{router, serve, serve_on, ServerConfig, ServerError, SessionState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn state() -> Arc<SessionState> {
    Arc::new(SessionState::new(
        ProjectDataset::reference(),
        DesiredRangeTable::default(),
    ))
}

async fn call(state: &Arc<SessionState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router(Arc::clone(state)).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn get_json(state: &Arc<SessionState>, uri: &str) -> (StatusCode, Value) {
    let (s, body) = call(state, "GET", uri, None).await;
    (s, serde_json::from_str(&body).unwrap())
}

async fn post_json(state: &Arc<SessionState>, uri: &str, body: Value) -> (StatusCode, Value) {
    let (s, body) = call(state, "POST", uri, Some(body)).await;
    (s, serde_json::from_str(&body).unwrap())
}

#[tokio::test]
async fn lists_fifteen_projects() {
    let (status, body) = get_json(&state(), "/projects").await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = body["projects"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids.len(), 15);
    assert_eq!(ids[0], "P1");
    assert_eq!(body["validation"]["violations"], json!([]));
}

#[tokio::test]
async fn project_metrics_carry_capture_rate() {
    let (status, body) = call(&state(), "GET", "/projects/P1/metrics", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.contains(r#""tc_pct": 96.0"#), "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["size"], "small");
    assert_eq!(v["phases"][0]["phase"], "req");
}

#[tokio::test]
async fn unknown_project_is_404_problem() {
    let (status, body) = get_json(&state(), "/projects/P99/metrics").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not-found");
    assert_eq!(body["location"], "projects/P99");
    let (status, _) = get_json(&state(), "/projects/P99/compliance").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn compliance_flags_p10() {
    let (status, body) = get_json(&state(), "/projects/P10/compliance").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["capture_below_90"], true);
    assert_eq!(body["low_inspection_share_phases"], json!(["req"]));
    let insp = body["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["phase"] == "req" && c["metric"] == "inspection_time_pct")
        .unwrap();
    assert_eq!(insp["verdict"], "below");
}

#[tokio::test]
async fn tables_and_bad_ids() {
    let s = state();
    let (status, body) = get_json(&s, "/tables/6").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["errata"], json!([]));
    let (status, body) = get_json(&s, "/tables/3").await;
    assert_eq!(status, StatusCode::OK);
    assert!(!body["errata"].as_array().unwrap().is_empty());
    let (status, body) = get_json(&s, "/tables/9").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "argument");
    let (status, _) = get_json(&s, "/tables/six").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn pattern_and_plot() {
    let s = state();
    let (status, body) = get_json(&s, "/pattern").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["cells"].as_array().unwrap().len(), 45);
    let (status, body) = get_json(&s, "/plot/di").await;
    assert_eq!(status, StatusCode::OK);
    let series = body["series"].as_array().unwrap();
    assert_eq!(series.len(), 15);
    assert_eq!(series[0]["id"], "P1");
}

#[tokio::test]
async fn scheme_levels_for_a_slice() {
    let s = state();
    let (status, body) = get_json(&s, "/bbn/scheme?phase=req&size=small").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["nodes"][0]["node"], "num_inspectors");
    assert_eq!(body["nodes"][0]["levels"], json!(["L", "M", "H"]));
    let (status, body) = get_json(&s, "/bbn/scheme").await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["defaults"]["num_inspectors"].is_object());
    let (status, _) = get_json(&s, "/bbn/scheme?phase=req").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = get_json(&s, "/ranges").await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn posterior_query() {
    let (status, body) = post_json(
        &state(),
        "/bbn/query",
        json!({"phase": "req", "size": "small", "evidence": {"num_inspectors": "M"}}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body["posterior"],
        json!({"poor": 0.0, "moderate": 0.2, "desirable": 0.8, "excellent": 0.0})
    );
}

#[tokio::test]
async fn impossible_evidence_is_422() {
    let (status, body) = post_json(
        &state(),
        "/bbn/query",
        json!({"phase": "req", "size": "small", "evidence": {"num_inspectors": "H"}}),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "impossible-evidence");
}

#[tokio::test]
async fn malformed_requests_are_400() {
    let s = state();
    let (status, body) = call(&s, "POST", "/bbn/query", Some(json!("nope"))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["code"], "bad-request");

    let (status, _) = post_json(&s, "/bbn/query", json!({"phase": "req", "size": "huge"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = post_json(
        &s,
        "/bbn/query",
        json!({"phase": "req", "size": "small", "evidence": {"num_inspectors": "Q"}}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "argument");

    let (status, _) = post_json(&s, "/bbn/build", json!({"phase": "req", "size": "small", "smoothing": -1})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = get_json(&s, "/nowhere").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not-found");
}

#[tokio::test]
async fn build_is_memoized_with_a_stable_digest() {
    let s = state();
    let req = json!({"phase": "des", "size": "medium", "smoothing": 1.0});
    let (status, first) = call(&s, "POST", "/bbn/build", Some(req.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let (_, second) = call(&s, "POST", "/bbn/build", Some(req.clone())).await;
    assert_eq!(first, second);

    // a fresh session builds the same model from scratch
    let (_, third) = call(&state(), "POST", "/bbn/build", Some(req)).await;
    assert_eq!(first, third);

    let v: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["digest"].as_str().unwrap().len(), 64);
    let (_, other) = post_json(&s, "/bbn/build", json!({"phase": "des", "size": "medium"})).await;
    assert_ne!(other["digest"], v["digest"]);
}

#[tokio::test]
async fn recommend_ranks_inspector_levels() {
    let s = state();
    let (status, body) = post_json(
        &s,
        "/bbn/recommend",
        json!({
            "phase": "req",
            "size": "small",
            "target": ["desirable", "excellent"],
            "grid": [{"num_inspectors": "L"}, {"num_inspectors": "M"}, {"num_inspectors": "H"}]
        }),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let ranking = body["ranking"].as_array().unwrap();
    assert_eq!(ranking[0]["evidence"], json!({"num_inspectors": "M"}));
    assert_eq!(ranking[0]["mass"], 0.8);
    assert_eq!(ranking[1]["impossible"], true);

    let (status, _) = post_json(
        &s,
        "/bbn/recommend",
        json!({"phase": "req", "size": "small", "target": ["desirable"], "grid": []}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn responses_are_byte_stable() {
    let s = state();
    for uri in ["/projects", "/projects/P4/metrics", "/projects/P6/compliance", "/tables/7", "/pattern", "/plot/di"] {
        let a = call(&s, "GET", uri, None).await;
        let b = call(&state(), "GET", uri, None).await;
        assert_eq!(a, b, "{uri}");
    }
}

#[tokio::test]
async fn violations_are_flagged_not_fatal() {
    let mut ds = ProjectDataset::reference();
    ds.projects_mut()[0].phases[0].severities.blocker += 1;
    let s = Arc::new(SessionState::new(ds, DesiredRangeTable::default()));
    let (status, body) = get_json(&s, "/projects").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["projects"][0]["violations"], 1);
    let (_, body) = get_json(&s, "/projects/P1/metrics").await;
    assert_eq!(body["violations"][0]["rule"], "severity-sum");
}

#[tokio::test]
async fn serves_on_a_real_port_and_shuts_down() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve_on(listener, state(), async {
        let _ = rx.await;
    }));

    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    stream
        .write_all(b"GET /projects HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).await.unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains(r#""id": "P15""#));

    tx.send(()).unwrap();
    server.await.unwrap().unwrap();
}

#[tokio::test]
async fn startup_errors() {
    let cfg = ServerConfig {
        port: 0,
        dataset: "/definitely/not/here.json".into(),
        ranges: None,
    };
    assert!(matches!(serve(cfg, async {}).await, Err(ServerError::Dataset { .. })));

    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let cfg = ServerConfig {
        port: busy.local_addr().unwrap().port(),
        ..ServerConfig::default()
    };
    assert!(matches!(serve(cfg, async {}).await, Err(ServerError::Bind { .. })));
}
