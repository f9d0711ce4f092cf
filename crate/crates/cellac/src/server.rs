//! HTTP service over an immutable snapshot.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::api::{suggest, ApiError, SuggestRequest};
use crate::artifacts::Snapshot;

pub fn router(snapshot: Arc<Snapshot>) -> Router {
    Router::new()
        .route("/v1/suggest", post(suggest_handler))
        .route("/v1/health", get(health))
        .route("/v1/stats", get(stats))
        .with_state(snapshot)
}

fn error_response(status: StatusCode, err: ApiError) -> Response {
    (status, Json(json!({ "error": err }))).into_response()
}

async fn suggest_handler(State(snap): State<Arc<Snapshot>>, body: Bytes) -> Response {
    let req: SuggestRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, ApiError::new("malformed_body", e.to_string())),
    };
    // ranking is CPU-bound; keep it off the reactor threads
    let result = tokio::task::spawn_blocking(move || suggest(&snap, &req)).await;
    match result {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err(e)) if e.is_client_error() => error_response(StatusCode::BAD_REQUEST, e),
        Ok(Err(e)) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, ApiError::new("internal", e.to_string())),
    }
}

async fn health(State(snap): State<Arc<Snapshot>>) -> Response {
    Json(json!({ "status": "ok", "versions": snap.versions })).into_response()
}

async fn stats(State(snap): State<Arc<Snapshot>>) -> Response {
    let e = &snap.engine;
    let stats = e.stats.as_ref();
    let body = json!({
        "corpus": {
            "tables": e.corpus.len(),
            "skipped": e.corpus.skipped(),
        },
        "kb": {
            "triples": e.kb.len(),
            "subjects": e.kb.num_subjects(),
        },
        "stats": {
            "h2h_headings": stats.map_or(0, |s| s.h2h_counts().len()),
            "h2p_headings": stats.map_or(0, |s| s.h2p_counts().len()),
        },
        "embeddings": e.embeddings.as_ref().map(|m| json!({ "labels": m.vocab().len(), "dim": m.dim() })),
        "tmatch": e.tmatch.as_ref().map(|m| json!({ "trees": m.trees().len() })),
        "ltr": {
            "groups": snap.ltr.groups.as_str(),
            "features": snap.ltr.forest.schema().len(),
            "trees": snap.ltr.forest.trees().len(),
        },
        "settings": {
            "gamma_ed": e.settings.gamma_ed,
            "gamma_mp": e.settings.gamma_mp,
            "tau_ed": e.settings.tau_ed,
            "msje_threshold": e.settings.matching.msje_threshold,
        },
    });
    ([(header::CACHE_CONTROL, "no-store")], Json(body)).into_response()
}

/// Bind and serve until Ctrl-C.
pub async fn serve(snapshot: Arc<Snapshot>, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(snapshot))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
