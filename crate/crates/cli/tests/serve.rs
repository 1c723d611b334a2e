use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use issuebert::baseline::{bow_train, BowConfig};
use issuebert::classifier::LoadedModel;
use issuebert::BowModel;
use issuebert_cli::serve::{router, MAX_BODY_BYTES};
use issuebert_testkit::synth;
use serde_json::Value;
use tower::ServiceExt;

fn model() -> Arc<LoadedModel> {
    let cfg = BowConfig {
        bucket_count: 1024,
        ..BowConfig::default()
    };
    let m: BowModel = bow_train(&synth::separable(12, 3), &cfg).unwrap();
    Arc::new(LoadedModel::Baseline(m))
}

async fn send(req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = router(model()).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn post(body: impl Into<Body>) -> Request<Body> {
    Request::post("/predict")
        .header("content-type", "application/json")
        .body(body.into())
        .unwrap()
}

#[tokio::test]
async fn predict_returns_label_and_probabilities() {
    let (status, body) = send(post(r#"{"title":"crash","body":""}"#)).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert!(["bug", "enhancement", "question"].contains(&v["label"].as_str().unwrap()));
    let sum: f64 = v["probabilities"].as_object().unwrap().values().map(|p| p.as_f64().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-5);
}

#[tokio::test]
async fn response_matches_offline_prediction() {
    let m = model();
    let expected = m.predict("the app crashes").unwrap().to_json();
    let resp = router(m)
        .oneshot(post(r#"{"title":"The app","body":"CRASHES"}"#))
        .await
        .unwrap();
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap(), expected);
}

#[tokio::test]
async fn malformed_json_is_rejected() {
    for bad in ["{not json", r#"{"body":"no title"}"#, r#"{"title": 3}"#, ""] {
        let (status, body) = send(post(bad)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
        let v: Value = serde_json::from_slice(&body).unwrap();
        assert!(v["error"].is_string());
    }
}

#[tokio::test]
async fn oversized_body_is_rejected() {
    let big = format!(r#"{{"title":"x","body":"{}"}}"#, "a".repeat(MAX_BODY_BYTES));
    let (status, _) = send(post(big)).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn health_reports_ok() {
    let (status, body) = send(Request::get("/health").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"ok");
}

#[tokio::test]
async fn unknown_route_is_not_found() {
    let (status, _) = send(Request::get("/nope").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
