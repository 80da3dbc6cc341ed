//! HTTP API over the session store, with a server-sent event stream per
//! session.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast;

use planweave_core::session::{ControlAction, Event, SessionError, SessionStore};
use planweave_core::{EditOp, NodeId, Value};

const CHANNEL_CAPACITY: usize = 1024;

#[derive(Clone)]
pub struct AppState {
    store: Arc<SessionStore>,
    channels: Arc<Mutex<HashMap<String, broadcast::Sender<Event>>>>,
}

impl AppState {
    pub fn new(store: Arc<SessionStore>) -> Self {
        let channels: Arc<Mutex<HashMap<String, broadcast::Sender<Event>>>> = Arc::default();
        let sink = channels.clone();
        store.set_listener(Some(Arc::new(move |id: &str, event: &Event| {
            if let Some(tx) = sink.lock().expect("channels lock").get(id) {
                // No receivers is fine: nobody is following this session.
                let _ = tx.send(event.clone());
            }
        })));
        AppState { store, channels }
    }

    fn subscribe(&self, id: &str) -> broadcast::Receiver<Event> {
        self.channels
            .lock()
            .expect("channels lock")
            .entry(id.to_string())
            .or_insert_with(|| broadcast::channel(CHANNEL_CAPACITY).0)
            .subscribe()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/plan", axum::routing::patch(patch_plan))
        .route("/sessions/{id}/plan/override", post(override_output))
        .route("/sessions/{id}/control", post(control))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

/// Binds, prints the bound address, and serves until Ctrl-C or SIGTERM.
pub async fn serve(store: Arc<SessionStore>, host: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    // Handlers go in before the address is announced, so a client that
    // signals right after seeing it still gets a graceful exit.
    let shutdown = shutdown_signal()?;
    println!("listening on http://{}", listener.local_addr()?);
    use std::io::Write;
    std::io::stdout().flush()?;
    axum::serve(listener, router(AppState::new(store)))
        .with_graceful_shutdown(shutdown)
        .await?;
    // Every change is persisted before its response is sent, so there is
    // nothing left to write here.
    log::info!("shut down");
    Ok(())
}

#[cfg(unix)]
fn shutdown_signal() -> std::io::Result<impl std::future::Future<Output = ()>> {
    use tokio::signal::unix::{signal, SignalKind};
    let mut interrupt = signal(SignalKind::interrupt())?;
    let mut terminate = signal(SignalKind::terminate())?;
    Ok(async move {
        tokio::select! {
            _ = interrupt.recv() => {},
            _ = terminate.recv() => {},
        }
    })
}

#[cfg(not(unix))]
fn shutdown_signal() -> std::io::Result<impl std::future::Future<Output = ()>> {
    Ok(async {
        let _ = tokio::signal::ctrl_c().await;
    })
}

struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::NoPlan | SessionError::NoQuery => StatusCode::CONFLICT,
            e if e.is_client_error() => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

/// Session work blocks on model calls and disk, so it runs off the reactor.
async fn blocking<T: Send + 'static>(
    work: impl FnOnce() -> Result<T, SessionError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(work)
        .await
        .map_err(|e| ApiError(SessionError::Storage(std::io::Error::other(e.to_string()))))?
        .map_err(ApiError)
}

async fn create_session(State(app): State<AppState>) -> Result<Json<serde_json::Value>, ApiError> {
    let store = app.store.clone();
    let state = blocking(move || store.create()).await?;
    Ok(Json(json!({ "id": state.id })))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let state = app.store.state(&id)?;
    Ok(Json(state).into_response())
}

#[derive(Deserialize)]
struct MessageBody {
    text: String,
}

async fn post_message(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<MessageBody>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let store = app.store.clone();
    let (reply, events) = blocking(move || store.post_message(&id, &body.text)).await?;
    Ok(Json(json!({ "reply": reply, "events": events })))
}

async fn patch_plan(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(op): Json<EditOp>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let store = app.store.clone();
    let events = blocking(move || store.apply_edit(&id, &op)).await?;
    Ok(Json(json!({ "events": events })))
}

#[derive(Deserialize)]
struct OverrideBody {
    node: NodeId,
    output: String,
    value: Value,
}

async fn override_output(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<OverrideBody>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let store = app.store.clone();
    let events = blocking(move || store.override_output(&id, body.node, &body.output, body.value)).await?;
    Ok(Json(json!({ "events": events })))
}

async fn control(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(action): Json<ControlAction>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let store = app.store.clone();
    let events = blocking(move || store.control(&id, action)).await?;
    Ok(Json(json!({ "events": events })))
}

#[derive(Deserialize)]
struct EventsQuery {
    /// Replay only events after this sequence number.
    after: Option<u64>,
    /// `false` ends the stream after the backlog.
    follow: Option<bool>,
}

fn to_sse(event: &Event) -> SseEvent {
    let kind = serde_json::to_value(event.kind).expect("kind serializes");
    SseEvent::default()
        .id(event.seq.to_string())
        .event(kind.as_str().unwrap_or("message"))
        .data(serde_json::to_string(event).expect("event serializes"))
}

async fn events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, ApiError> {
    let resume_from = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok());
    let after = query.after.or(resume_from).unwrap_or(0);
    // Subscribe before reading the backlog so nothing falls in between.
    let live = app.subscribe(&id);
    let backlog = app.store.events_since(&id, after)?;
    let last = backlog.last().map_or(after, |e| e.seq);
    let backlog = stream::iter(backlog.iter().map(to_sse).map(Ok).collect::<Vec<_>>());
    let follow = query.follow.unwrap_or(true);
    let live = stream::unfold((live, last, follow), |(mut rx, last, follow)| async move {
        if !follow {
            return None;
        }
        loop {
            match rx.recv().await {
                Ok(event) if event.seq <= last => continue,
                Ok(event) => {
                    let seq = event.seq;
                    return Some((Ok(to_sse(&event)), (rx, seq, follow)));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(backlog.chain(live)).keep_alive(KeepAlive::default()))
}
