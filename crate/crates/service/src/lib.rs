//! Session service: interactive play over HTTP and WebSocket with live
//! consistency telemetry.
//!
//! Routes:
//! - `POST /sessions` with a generator spec, returns the session id and the
//!   initial frame message
//! - `POST /sessions/{id}/step` with `{"action": "left"}`, returns a frame message
//! - `GET /sessions/{id}/map` returns the stitched map as PNG
//! - `GET /sessions/{id}/report` returns the running metric report
//! - `DELETE /sessions/{id}`
//! - `GET /sessions/{id}/stream` upgrades to a WebSocket

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use gamecon_core::metrics::{MetricTracker, StepTelemetry};
use gamecon_core::{Action, Error as CoreError, GeneratorHandle, GeneratorSpec, MetricReport, TraceEntry};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub idle_timeout: Duration,
    /// How often idle sessions are swept.
    pub sweep_interval: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { idle_timeout: DEFAULT_IDLE_TIMEOUT, sweep_interval: Duration::from_secs(30) }
    }
}

/// Messages a stream client may send.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Action { action: String },
    SetCorruption { p: Option<f64>, q: Option<f64> },
}

/// Per-step payload: the frame plus running telemetry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    /// Base64-encoded PNG.
    pub frame: String,
    pub score: u16,
    pub rendered_score: u16,
    /// Position exported by the stitched map; `None` for Pong.
    pub player_x: Option<i64>,
    pub player_y: Option<i64>,
    pub event: bool,
    pub spacon_running: Option<f64>,
    pub numcon_running: f64,
    pub actacc_running: Option<f64>,
    pub ambiguous_match: bool,
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame(FrameMessage),
    Ended { step: u64, report: Box<MetricReport> },
    CorruptionSet { generator: GeneratorSpec },
    Error { message: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CreatedSession {
    pub id: String,
    pub generator: GeneratorSpec,
    pub width: usize,
    pub height: usize,
    pub initial: FrameMessage,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRequest {
    pub action: String,
}

#[derive(Debug)]
pub enum ServiceError {
    NotFound(String),
    BadRequest(String),
    Internal(String),
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ServiceError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ServiceError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ServiceError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(ServerMessage::Error { message })).into_response()
    }
}

impl From<CoreError> for ServiceError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(_) | CoreError::Image(_) | CoreError::Json(_) => {
                ServiceError::Internal(e.to_string())
            }
            _ => ServiceError::BadRequest(e.to_string()),
        }
    }
}

/// One interactive game with its metric tracker.
pub struct Session {
    handle: GeneratorHandle,
    tracker: MetricTracker,
    last: StepTelemetry,
    last_entry: TraceEntry,
    last_used: Instant,
}

impl Session {
    pub fn new(spec: GeneratorSpec) -> Result<Self, CoreError> {
        let handle = GeneratorHandle::new(spec.clone())?;
        let mut tracker = MetricTracker::for_game(spec.game).with_seed(spec.seed);
        let entry = handle.initial_entry();
        let last = tracker.observe(handle.frame(), &entry)?;
        Ok(Self { handle, tracker, last, last_entry: entry, last_used: Instant::now() })
    }

    pub fn is_ended(&self) -> bool {
        self.handle.is_exhausted()
    }

    pub fn step(&mut self, action: &str) -> Result<FrameMessage, CoreError> {
        let game = self.handle.spec().game;
        let action = parse_action(game, action)?;
        let (frame, entry) = self.handle.step(action)?;
        self.last = self.tracker.observe(&frame, &entry)?;
        self.last_entry = entry;
        self.frame_message()
    }

    pub fn set_corruption(&mut self, p: Option<f64>, q: Option<f64>) -> Result<GeneratorSpec, CoreError> {
        self.handle.set_corruption(p, q)?;
        Ok(self.handle.spec().clone())
    }

    pub fn frame_message(&self) -> Result<FrameMessage, CoreError> {
        let png = self.handle.frame().to_png()?;
        let counts = self.tracker.counts();
        let pos = self.tracker.map().and_then(|m| m.player_pos());
        Ok(FrameMessage {
            frame: base64::engine::general_purpose::STANDARD.encode(png),
            score: self.last_entry.true_score,
            rendered_score: self.last_entry.rendered_score,
            player_x: pos.map(|p| p.0),
            player_y: pos.map(|p| p.1),
            event: self.last_entry.true_event,
            spacon_running: counts.spacon(),
            numcon_running: counts.numcon(),
            actacc_running: counts.actacc(),
            ambiguous_match: self.last.matched.as_ref().is_some_and(|m| m.ambiguous),
            step: self.last_entry.step,
        })
    }

    pub fn report(&self) -> MetricReport {
        let counts = self.tracker.counts().clone();
        let spec = self.handle.spec().clone();
        MetricReport::from_episodes(spec.clone(), counts.frames as usize, spec.seed, vec![counts])
    }

    pub fn map_png(&self) -> Result<Vec<u8>, CoreError> {
        let game = self.handle.spec().game;
        let map = self.tracker.map().ok_or(CoreError::NoMap(game))?;
        map.to_frame().to_png()
    }
}

fn parse_action(game: gamecon_core::GameId, s: &str) -> Result<Action, CoreError> {
    let action: Action = s.parse()?;
    action.check(game)?;
    Ok(action)
}

type SessionRef = Arc<Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, SessionRef>>>,
    config: ServiceConfig,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self { sessions: Arc::default(), config }
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    fn get(&self, id: &str) -> Result<SessionRef, ServiceError> {
        let s = self
            .sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no session {id}")))?;
        s.lock().unwrap().last_used = Instant::now();
        Ok(s)
    }

    /// Drops sessions idle for longer than the configured timeout.
    pub fn evict_idle(&self) -> usize {
        let timeout = self.config.idle_timeout;
        let mut sessions = self.sessions.lock().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| s.try_lock().map_or(true, |s| s.last_used.elapsed() < timeout));
        before - sessions.len()
    }
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<GeneratorSpec>, axum::extract::rejection::JsonRejection>,
) -> Result<(StatusCode, Json<CreatedSession>), ServiceError> {
    let Json(spec) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let session = Session::new(spec.clone())?;
    let initial = session.frame_message()?;
    let config = session.handle.state().config();
    let (width, height) = (config.width, config.height);
    let id = uuid::Uuid::new_v4().simple().to_string();
    state.sessions.lock().unwrap().insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(CreatedSession { id, generator: spec, width, height, initial })))
}

async fn step_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<StepRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<ServerMessage>, ServiceError> {
    let Json(req) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let session = state.get(&id)?;
    let mut s = session.lock().unwrap();
    Ok(Json(step_message(&mut s, &req.action)?))
}

fn step_message(s: &mut Session, action: &str) -> Result<ServerMessage, CoreError> {
    if s.is_ended() {
        return Ok(ServerMessage::Ended { step: s.last_entry.step, report: Box::new(s.report()) });
    }
    Ok(ServerMessage::Frame(s.step(action)?))
}

async fn get_map(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let session = state.get(&id)?;
    let png = session.lock().unwrap().map_png().map_err(|e| match e {
        CoreError::NoMap(_) => ServiceError::NotFound(e.to_string()),
        other => other.into(),
    })?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn get_report(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<MetricReport>, ServiceError> {
    let session = state.get(&id)?;
    let report = session.lock().unwrap().report();
    Ok(Json(report))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> StatusCode {
    match state.sessions.lock().unwrap().remove(&id) {
        Some(_) => StatusCode::NO_CONTENT,
        None => StatusCode::NOT_FOUND,
    }
}

async fn stream(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ServiceError> {
    let session = state.get(&id)?;
    Ok(ws.on_upgrade(move |socket| run_stream(socket, session)))
}

fn encode(msg: &ServerMessage) -> Message {
    Message::Text(serde_json::to_string(msg).expect("server messages serialize").into())
}

/// Handles one client message against the session.
fn handle_text(session: &SessionRef, text: &str) -> ServerMessage {
    let mut s = session.lock().unwrap();
    s.last_used = Instant::now();
    let msg: ClientMessage = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(e) => return ServerMessage::Error { message: format!("bad message: {e}") },
    };
    let out = match msg {
        ClientMessage::Action { action } => step_message(&mut s, &action),
        ClientMessage::SetCorruption { p, q } => {
            s.set_corruption(p, q).map(|generator| ServerMessage::CorruptionSet { generator })
        }
    };
    out.unwrap_or_else(|e| ServerMessage::Error { message: e.to_string() })
}

async fn run_stream(mut socket: WebSocket, session: SessionRef) {
    let hello = session.lock().unwrap().frame_message();
    let hello = match hello {
        Ok(f) => ServerMessage::Frame(f),
        Err(e) => ServerMessage::Error { message: e.to_string() },
    };
    if socket.send(encode(&hello)).await.is_err() {
        return;
    }
    while let Some(Ok(msg)) = socket.recv().await {
        let reply = match msg {
            Message::Text(t) => handle_text(&session, t.as_str()),
            Message::Close(_) => break,
            _ => continue,
        };
        let ended_now = matches!(reply, ServerMessage::Frame(_)) && session.lock().unwrap().is_ended();
        if socket.send(encode(&reply)).await.is_err() {
            break;
        }
        if ended_now {
            let ended = {
                let s = session.lock().unwrap();
                ServerMessage::Ended { step: s.last_entry.step, report: Box::new(s.report()) }
            };
            if socket.send(encode(&ended)).await.is_err() {
                break;
            }
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/step", post(step_session))
        .route("/sessions/{id}/map", get(get_map))
        .route("/sessions/{id}/report", get(get_report))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

/// Serves on an already bound listener until the task is dropped. Idle
/// sessions are swept in the background.
pub async fn serve_listener(listener: tokio::net::TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::new(config.clone());
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(config.sweep_interval);
        loop {
            tick.tick().await;
            sweeper.evict_idle();
        }
    });
    axum::serve(listener, router(state)).await
}

pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_listener(listener, config).await
}
