//! JSON-over-HTTP binding of the session registry.

use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use super::{SessionError, SessionRegistry};
use crate::engine::Limits;
use crate::syntax::MoveEntry;

#[derive(Clone)]
struct AppState {
    registry: Arc<SessionRegistry>,
    static_dir: Option<Arc<PathBuf>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    program: String,
    query: String,
    max_steps: Option<u64>,
}

fn status_of(e: &SessionError) -> StatusCode {
    match e {
        SessionError::Parse { .. } | SessionError::Polarity(_) => StatusCode::BAD_REQUEST,
        SessionError::UnknownSession(_) => StatusCode::NOT_FOUND,
        SessionError::IllegalState(_) => StatusCode::CONFLICT,
        SessionError::OutOfRange { .. } | SessionError::BadTerm(_) => StatusCode::UNPROCESSABLE_ENTITY,
        SessionError::Engine(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for SessionError {
    fn into_response(self) -> Response {
        (status_of(&self), Json(self.to_json())).into_response()
    }
}

fn bad_request(message: String) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(json!({"error": "bad_request", "message": message})),
    )
        .into_response()
}

// Engine work is CPU-bound; keep it off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("session task panicked")
}

async fn create(State(app): State<AppState>, body: Bytes) -> Response {
    let body: CreateBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return bad_request(e.to_string()),
    };
    let limits = body.max_steps.map_or_else(Limits::default, Limits::with_max_steps);
    let reg = app.registry.clone();
    match blocking(move || reg.create(&body.program, &body.query, limits)).await {
        Ok((id, state)) => (StatusCode::CREATED, Json(json!({"id": id, "state": state}))).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn show(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    match app.registry.get(&id) {
        Ok(state) => Json(json!({ "state": state })).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn submit(State(app): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    let entry: MoveEntry = match serde_json::from_slice(&body) {
        Ok(m) => m,
        Err(e) => return bad_request(format!("expected {{\"pick\": int}} or {{\"term\": str}}: {e}")),
    };
    let reg = app.registry.clone();
    match blocking(move || reg.submit(&id, entry)).await {
        Ok(state) => Json(json!({ "state": state })).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn close(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    match app.registry.close(&id) {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => e.into_response(),
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript; charset=utf-8",
        "css" => "text/css; charset=utf-8",
        "json" | "map" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "ico" => "image/x-icon",
        "wasm" => "application/wasm",
        "txt" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

async fn assets(State(app): State<AppState>, uri: Uri) -> Response {
    let Some(root) = app.static_dir else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let rel = uri.path().trim_start_matches('/');
    let rel = Path::new(if rel.is_empty() { "index.html" } else { rel });
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return StatusCode::NOT_FOUND.into_response();
    }
    let mut path = root.join(rel);
    if path.is_dir() {
        path.push("index.html");
    }
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

/// The protocol routes, plus static files from `static_dir` when given.
pub fn router(registry: Arc<SessionRegistry>, static_dir: Option<PathBuf>) -> Router {
    let state = AppState {
        registry,
        static_dir: static_dir.map(Arc::new),
    };
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show).delete(close))
        .route("/sessions/{id}/moves", post(submit))
        .fallback(assets)
        .with_state(state)
}

/// Serves until ctrl-c. Fails immediately if the address cannot be bound.
pub async fn serve(addr: std::net::SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let registry = Arc::new(SessionRegistry::default());
    let reaper = registry.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            reaper.purge_expired();
        }
    });
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(registry, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
