use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use issuebert::classifier::LoadedModel;
use issuebert::corpus::{preprocess, IssueLabel, IssueRecord};
use serde::Deserialize;
use serde_json::json;

use crate::CliError;

pub const MAX_BODY_BYTES: usize = 1 << 20;

#[derive(Deserialize)]
struct PredictRequest {
    title: String,
    #[serde(default)]
    body: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

/// The body is taken as raw bytes so malformed JSON gets a 400 with our own
/// error shape rather than the extractor's rejection.
async fn predict(State(model): State<Arc<LoadedModel>>, body: Bytes) -> Response {
    let req: PredictRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid request: {e}")),
    };
    let clean = preprocess(&IssueRecord {
        label: IssueLabel::Bug,
        title: req.title,
        body: req.body,
    });
    match model.predict(&clean.text) {
        Ok(p) => Json(p.to_json()).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn health() -> &'static str {
    "ok"
}

pub fn router(model: Arc<LoadedModel>) -> Router {
    Router::new()
        .route("/predict", post(predict))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(model)
}

async fn shutdown_signal() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        log::error!("cannot listen for interrupt: {e}");
        std::future::pending::<()>().await;
    }
    log::info!("interrupt received, shutting down");
}

pub fn serve(checkpoint: &Path, host: &str, port: u16) -> Result<(), CliError> {
    let model = LoadedModel::load(checkpoint).with_context(|| format!("cannot load checkpoint {}", checkpoint.display()))?;
    let addr: SocketAddr = format!("{host}:{port}").parse().with_context(|| format!("bad address {host}:{port}"))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        log::info!("listening on {}", listener.local_addr()?);
        eprintln!("serving {} on http://{}", checkpoint.display(), listener.local_addr()?);
        axum::serve(listener, router(Arc::new(model)))
            .with_graceful_shutdown(shutdown_signal())
            .await?;
        Ok::<(), anyhow::Error>(())
    })?;
    Ok(())
}
