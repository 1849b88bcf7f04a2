use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use molenum_cli::service::{router, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn submit(app: &Router, spec: Value) -> String {
    let (status, body) = call(app, Method::POST, "/api/v1/jobs", Some(spec)).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

async fn wait(app: &Router, id: &str) -> Value {
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let (status, body) = call(app, Method::GET, &format!("/api/v1/jobs/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if !matches!(body["state"].as_str(), Some("queued" | "running")) {
            return body;
        }
        assert!(Instant::now() < deadline, "job {id} did not finish");
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
}

fn app() -> Router {
    router(ServiceConfig::default())
}

#[tokio::test]
async fn ethanol_job_finds_two_models() {
    let app = app();
    let id = submit(&app, json!({ "formula": "C2H6O" })).await;
    let status = wait(&app, &id).await;
    assert_eq!(status["state"], "done");
    assert_eq!(status["models_found"], 2);

    let (code, page) = call(&app, Method::GET, &format!("/api/v1/jobs/{id}/results"), None).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(page["total"], 2);
    assert_eq!(page["complete"], true);
    let items = page["items"].as_array().unwrap();
    assert_eq!(items[0]["index"], 0);
    assert_eq!(items[1]["index"], 1);
    assert!(items.iter().all(|i| i["smiles"].is_string()));
}

#[tokio::test]
async fn result_pages_are_stable() {
    let app = app();
    let id = submit(&app, json!({ "formula": "C5H10O" })).await;
    wait(&app, &id).await;
    let uri = format!("/api/v1/jobs/{id}/results?offset=0&limit=1");
    let (_, first) = call(&app, Method::GET, &uri, None).await;
    let (_, second) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(first, second);
    assert_eq!(first["items"].as_array().unwrap().len(), 1);

    // the same spec yields identical pages in a new job
    let again = submit(&app, json!({ "formula": "C5H10O" })).await;
    wait(&app, &again).await;
    let (_, rerun) = call(&app, Method::GET, &format!("/api/v1/jobs/{again}/results?offset=0&limit=1"), None).await;
    assert_eq!(first, rerun);

    let (_, past_end) = call(&app, Method::GET, &format!("/api/v1/jobs/{id}/results?offset=10000"), None).await;
    assert_eq!(past_end["items"], json!([]));
}

#[tokio::test]
async fn infeasible_formula_is_a_bad_request() {
    let app = app();
    let (status, body) = call(&app, Method::POST, "/api/v1/jobs", Some(json!({ "formula": "C1H1" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("infeasible formula"));
    assert!(body["fields"]["formula"].is_string());
}

#[tokio::test]
async fn invalid_specs_report_field_errors() {
    let app = app();
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/v1/jobs",
        Some(json!({ "formula": "C2H6O", "fragments": ["C(C"], "forbidden_bond_orders": [1] })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["fields"]["fragments[0]"].is_string());
    assert!(body["fields"]["forbidden_bond_orders"].is_string());

    let (status, body) = call(&app, Method::POST, "/api/v1/jobs", Some(json!({ "formula": "C2H6O", "mass": 46.0 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["fields"]["mass"].as_str().unwrap().contains("not supported"));

    let req = Request::builder()
        .method(Method::POST)
        .uri("/api/v1/jobs")
        .body(Body::from("{not json"))
        .unwrap();
    assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_jobs_are_not_found() {
    let app = app();
    for (method, uri) in [
        (Method::GET, "/api/v1/jobs/999"),
        (Method::GET, "/api/v1/jobs/999/results"),
        (Method::DELETE, "/api/v1/jobs/999"),
    ] {
        let (status, _) = call(&app, method, uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
    }
}

#[tokio::test]
async fn cancelling_stops_a_job_and_keeps_results() {
    let app = app();
    let id = submit(&app, json!({ "formula": "C8H2", "dedup": "off" })).await;
    let started = Instant::now();
    // let a few results arrive first
    loop {
        let (_, s) = call(&app, Method::GET, &format!("/api/v1/jobs/{id}"), None).await;
        if s["models_found"].as_u64().unwrap() > 0 || started.elapsed() > Duration::from_secs(30) {
            break;
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    let (status, _) = call(&app, Method::DELETE, &format!("/api/v1/jobs/{id}"), None).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let done = wait(&app, &id).await;
    assert_eq!(done["state"], "cancelled");
    let found = done["models_found"].as_u64().unwrap();
    let (_, page) = call(&app, Method::GET, &format!("/api/v1/jobs/{id}/results?limit=1000"), None).await;
    assert_eq!(page["total"].as_u64().unwrap(), found);

    let (status, _) = call(&app, Method::DELETE, &format!("/api/v1/jobs/{id}"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn budgets_are_reported() {
    let app = app();
    let id = submit(&app, json!({ "formula": "C6H6", "max_models": 4 })).await;
    let status = wait(&app, &id).await;
    assert_eq!(status["state"], "budget_exhausted");
    assert_eq!(status["models_found"], 4);
    assert!(!status["warning_flags"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn capacity_is_enforced() {
    let app = router(ServiceConfig {
        max_jobs: 1,
        ..ServiceConfig::default()
    });
    let id = submit(&app, json!({ "formula": "C8H2", "dedup": "off" })).await;
    let (status, _) = call(&app, Method::POST, "/api/v1/jobs", Some(json!({ "formula": "CH4" }))).await;
    assert_eq!(status, StatusCode::TOO_MANY_REQUESTS);
    call(&app, Method::DELETE, &format!("/api/v1/jobs/{id}"), None).await;
    wait(&app, &id).await;
    submit(&app, json!({ "formula": "CH4" })).await;
}

#[tokio::test]
async fn finished_jobs_expire() {
    let app = router(ServiceConfig {
        ttl: Duration::from_millis(50),
        ..ServiceConfig::default()
    });
    let id = submit(&app, json!({ "formula": "CH4" })).await;
    wait(&app, &id).await;
    tokio::time::sleep(Duration::from_millis(120)).await;
    let (status, _) = call(&app, Method::GET, &format!("/api/v1/jobs/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn elements_lists_the_active_table() {
    let (status, body) = call(&app(), Method::GET, "/api/v1/elements", None).await;
    assert_eq!(status, StatusCode::OK);
    let carbon = body["elements"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["symbol"] == "C")
        .unwrap();
    assert_eq!(carbon["valence"], 4);
    assert_eq!(carbon["atomic_number"], 6);
}
