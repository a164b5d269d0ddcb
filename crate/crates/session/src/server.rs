//! HTTP and WebSocket front end. Each session runs in its own task, which
//! owns the environment; handlers talk to it through a command channel and
//! receive frames from a broadcast channel.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::MissedTickBehavior;

use crate::error::ServiceError;
use crate::protocol::{AdvanceRequest, ClientMessage, CreateSession, Created, Direction, EndReason, InputRequest, ServerMessage};
use crate::session::{SessionCore, SessionLog, SessionSpec, Status};

/// How session ticks are driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    /// A timer at each session's tick rate.
    #[default]
    Real,
    /// Ticks happen only on `POST /sessions/{id}/advance`.
    Fake,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    /// Maximum number of sessions not yet ended.
    pub capacity: usize,
    pub clock: Clock,
    /// Where to write each session's log when it ends.
    pub log_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { capacity: 16, clock: Clock::Real, log_dir: None }
    }
}

const FRAME_BUFFER: usize = 1 << 14;

type Reply<T> = oneshot::Sender<Result<T, ServiceError>>;

enum Command {
    Start(Reply<()>),
    Input { direction: Direction, client_tick: u64, reply: Reply<u64> },
    Advance { ticks: u64, reply: Reply<u64> },
    Log(oneshot::Sender<SessionLog>),
    Connected,
    Disconnected,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub status: Status,
    pub tick: u64,
    pub spec: SessionSpec,
}

struct Handle {
    commands: mpsc::UnboundedSender<Command>,
    frames: broadcast::Sender<ServerMessage>,
    info: Arc<Mutex<SessionInfo>>,
    /// Final message, kept for clients that connect after the end.
    ended: Arc<Mutex<Option<ServerMessage>>>,
}

impl Handle {
    async fn ask<T>(&self, make: impl FnOnce(Reply<T>) -> Command) -> Result<T, ServiceError> {
        let (tx, rx) = oneshot::channel();
        self.commands.send(make(tx)).map_err(|_| ServiceError::Internal("session loop stopped".into()))?;
        rx.await.map_err(|_| ServiceError::Internal("session loop stopped".into()))?
    }
}

struct Inner {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Handle>>>,
    sequence: AtomicU64,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

impl Service {
    pub fn new(config: ServiceConfig) -> Self {
        Self { inner: Arc::new(Inner { config, sessions: Mutex::new(HashMap::new()), sequence: AtomicU64::new(0) }) }
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/sessions", post(create))
            .route("/sessions/{id}", get(info))
            .route("/sessions/{id}/start", post(start))
            .route("/sessions/{id}/input", post(input))
            .route("/sessions/{id}/advance", post(advance))
            .route("/sessions/{id}/log", get(log))
            .route("/sessions/{id}/stream", get(stream))
            .with_state(self.clone())
    }

    fn handle(&self, id: &str) -> Result<Arc<Handle>, ServiceError> {
        self.inner.sessions.lock().expect("session table").get(id).cloned().ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn create(&self, req: &CreateSession) -> Result<String, ServiceError> {
        let spec = SessionSpec::from_request(req)?;
        let mut sessions = self.inner.sessions.lock().expect("session table");
        let live = sessions.values().filter(|h| h.info.lock().expect("session info").status != Status::Ended).count();
        if live >= self.inner.config.capacity {
            return Err(ServiceError::Capacity(self.inner.config.capacity));
        }
        let id = loop {
            let id = format!("{:032x}", rand::random::<u128>());
            if !sessions.contains_key(&id) {
                break id;
            }
        };
        let sequence = self.inner.sequence.fetch_add(1, Ordering::SeqCst);
        let core = SessionCore::new(id.clone(), sequence, spec.clone());
        let (commands, rx) = mpsc::unbounded_channel();
        let (frames, _) = broadcast::channel(FRAME_BUFFER);
        let info = Arc::new(Mutex::new(SessionInfo { id: id.clone(), status: Status::Idle, tick: 0, spec }));
        let ended = Arc::new(Mutex::new(None));
        let task = SessionTask {
            core,
            commands: rx,
            frames: frames.clone(),
            info: info.clone(),
            ended: ended.clone(),
            clock: self.inner.config.clock,
            log_dir: self.inner.config.log_dir.clone(),
            clients: 0,
            had_client: false,
            idle_ticks: 0,
        };
        tokio::spawn(task.run());
        sessions.insert(id.clone(), Arc::new(Handle { commands, frames, info, ended }));
        Ok(id)
    }
}

struct SessionTask {
    core: SessionCore,
    commands: mpsc::UnboundedReceiver<Command>,
    frames: broadcast::Sender<ServerMessage>,
    info: Arc<Mutex<SessionInfo>>,
    ended: Arc<Mutex<Option<ServerMessage>>>,
    clock: Clock,
    log_dir: Option<PathBuf>,
    clients: usize,
    had_client: bool,
    idle_ticks: u64,
}

impl SessionTask {
    async fn run(mut self) {
        let mut timer: Option<tokio::time::Interval> = None;
        loop {
            let command = match timer.as_mut() {
                Some(t) => tokio::select! {
                    biased;
                    c = self.commands.recv() => c,
                    _ = t.tick() => {
                        self.tick();
                        if self.core.status() == Status::Ended {
                            timer = None;
                        }
                        continue;
                    }
                },
                None => self.commands.recv().await,
            };
            let Some(command) = command else { return };
            match command {
                Command::Start(reply) => {
                    let r = self.core.start();
                    if r.is_ok() {
                        self.sync_info();
                        if self.clock == Clock::Real {
                            let period = Duration::from_secs_f64(1.0 / self.core.spec().tick_rate);
                            let mut t = tokio::time::interval(period);
                            t.set_missed_tick_behavior(MissedTickBehavior::Delay);
                            timer = Some(t);
                        }
                    }
                    let _ = reply.send(r);
                }
                Command::Input { direction, client_tick, reply } => {
                    let _ = reply.send(self.core.submit(direction, client_tick));
                }
                Command::Advance { ticks, reply } => {
                    let r = if self.clock != Clock::Fake {
                        Err(ServiceError::Conflict("advance needs the fake clock".into()))
                    } else if self.core.status() != Status::Running {
                        Err(ServiceError::Conflict("session is not running".into()))
                    } else {
                        let mut done = 0;
                        while done < ticks && self.core.status() == Status::Running {
                            self.tick();
                            done += 1;
                        }
                        Ok(done)
                    };
                    let _ = reply.send(r);
                }
                Command::Log(reply) => {
                    let _ = reply.send(self.core.log().clone());
                }
                Command::Connected => {
                    self.clients += 1;
                    self.had_client = true;
                    self.idle_ticks = 0;
                    let tick = self.core.tick();
                    self.core.note(crate::session::LogEvent::ClientConnected { tick });
                }
                Command::Disconnected => {
                    self.clients = self.clients.saturating_sub(1);
                    let tick = self.core.tick();
                    self.core.note(crate::session::LogEvent::ClientDisconnected { tick });
                }
            }
        }
    }

    fn tick(&mut self) {
        match self.core.step() {
            Ok(frame) => {
                let _ = self.frames.send(ServerMessage::Frame(frame));
            }
            Err(e) => {
                let _ = self.frames.send(ServerMessage::Error { message: e.to_string() });
                return;
            }
        }
        if self.had_client && self.clients == 0 {
            self.idle_ticks += 1;
        }
        if self.core.is_complete() {
            self.finish(EndReason::Completed);
        } else if self.had_client && self.clients == 0 && self.idle_ticks >= self.core.spec().grace_ticks {
            self.finish(EndReason::Disconnected);
        } else {
            self.sync_info();
        }
    }

    fn finish(&mut self, reason: EndReason) {
        let message = match self.core.end(reason) {
            Ok(m) => ServerMessage::Ended { final_metrics: m.into(), reason },
            Err(e) => ServerMessage::Error { message: e.to_string() },
        };
        self.sync_info();
        *self.ended.lock().expect("ended message") = Some(message.clone());
        let _ = self.frames.send(message);
        if let Some(dir) = &self.log_dir {
            let path = dir.join(format!("{}.json", self.core.log().id));
            let written = serde_json::to_vec_pretty(self.core.log()).map_err(std::io::Error::other).and_then(|bytes| std::fs::write(&path, bytes));
            if let Err(e) = written {
                eprintln!("could not write session log {}: {e}", path.display());
            }
        }
    }

    fn sync_info(&self) {
        let mut info = self.info.lock().expect("session info");
        info.status = self.core.status();
        info.tick = self.core.tick();
    }
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

async fn create(State(svc): State<Service>, body: Bytes) -> Result<Response, ServiceError> {
    let req: CreateSession = parse(&body)?;
    let id = svc.create(&req)?;
    Ok((StatusCode::CREATED, Json(Created { id })).into_response())
}

async fn info(State(svc): State<Service>, Path(id): Path<String>) -> Result<Json<SessionInfo>, ServiceError> {
    Ok(Json(svc.handle(&id)?.info.lock().expect("session info").clone()))
}

async fn start(State(svc): State<Service>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ServiceError> {
    svc.handle(&id)?.ask(Command::Start).await?;
    Ok(Json(serde_json::json!({ "status": Status::Running })))
}

async fn input(State(svc): State<Service>, Path(id): Path<String>, body: Bytes) -> Result<Json<ServerMessage>, ServiceError> {
    let req: InputRequest = parse(&body)?;
    let applies_at = svc.handle(&id)?.ask(|reply| Command::Input { direction: req.direction, client_tick: req.client_tick, reply }).await?;
    Ok(Json(ServerMessage::Ack { client_tick: req.client_tick, applies_at }))
}

#[derive(Serialize)]
struct Advanced {
    ticks: u64,
}

async fn advance(State(svc): State<Service>, Path(id): Path<String>, body: Bytes) -> Result<Response, ServiceError> {
    let req: AdvanceRequest = parse(&body)?;
    let ticks = svc.handle(&id)?.ask(|reply| Command::Advance { ticks: req.ticks, reply }).await?;
    Ok(Json(Advanced { ticks }).into_response())
}

async fn log(State(svc): State<Service>, Path(id): Path<String>) -> Result<Json<SessionLog>, ServiceError> {
    let handle = svc.handle(&id)?;
    let (tx, rx) = oneshot::channel();
    handle.commands.send(Command::Log(tx)).map_err(|_| ServiceError::Internal("session loop stopped".into()))?;
    Ok(Json(rx.await.map_err(|_| ServiceError::Internal("session loop stopped".into()))?))
}

async fn stream(State(svc): State<Service>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Result<Response, ServiceError> {
    let handle = svc.handle(&id)?;
    Ok(ws.on_upgrade(move |socket| client(socket, id, handle)))
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    let text = serde_json::to_string(msg).expect("server messages serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

#[derive(Deserialize)]
struct Probe {
    #[serde(rename = "type")]
    kind: Option<String>,
}

async fn client(mut socket: WebSocket, id: String, handle: Arc<Handle>) {
    let mut frames = handle.frames.subscribe();
    let _ = handle.commands.send(Command::Connected);
    let finished = handle.ended.lock().expect("ended message").clone();
    if let Some(msg) = finished {
        send(&mut socket, &msg).await;
        let _ = handle.commands.send(Command::Disconnected);
        let _ = socket.send(Message::Close(None)).await;
        return;
    }
    loop {
        tokio::select! {
            msg = frames.recv() => match msg {
                Ok(msg) => {
                    let last = matches!(msg, ServerMessage::Ended { .. });
                    if !send(&mut socket, &msg).await || last {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    send(&mut socket, &ServerMessage::Error { message: format!("client fell {n} frames behind") }).await;
                    break;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let reply = match serde_json::from_str::<ClientMessage>(&text) {
                        Ok(ClientMessage::Input { session, .. }) if session != id => {
                            ServerMessage::Error { message: format!("input for session {session} sent on the stream of {id}") }
                        }
                        Ok(ClientMessage::Input { direction, client_tick, .. }) => {
                            match handle.ask(|reply| Command::Input { direction, client_tick, reply }).await {
                                Ok(applies_at) => ServerMessage::Ack { client_tick, applies_at },
                                Err(e) => ServerMessage::Error { message: e.to_string() },
                            }
                        }
                        Err(e) => {
                            let kind = serde_json::from_str::<Probe>(&text).ok().and_then(|p| p.kind).unwrap_or_default();
                            ServerMessage::Error { message: format!("bad message (type {kind:?}): {e}") }
                        }
                    };
                    if !send(&mut socket, &reply).await {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    let _ = handle.commands.send(Command::Disconnected);
}

/// Serves the API on `addr` until the process is interrupted.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, Service::new(config).router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
