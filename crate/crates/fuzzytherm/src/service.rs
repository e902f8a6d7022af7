//! HTTP front end for one live closed loop.
//!
//! | method | path                      | body            | reply                         |
//! |--------|---------------------------|-----------------|-------------------------------|
//! | GET    | `/state`                  |                 | session snapshot              |
//! | POST   | `/runs`                   | run config JSON | `{"run_id"}`                  |
//! | POST   | `/runs/current/setpoint`  | `{"value"}`     | `{"run_id","setpoint"}`       |
//! | POST   | `/runs/current/stop`      |                 | `{"run_id","frames","record"}`|
//! | GET    | `/runs/{id}/record`       |                 | stored record JSON            |
//! | GET    | `/telemetry`              |                 | server-sent events            |
//!
//! The loop runs on its own thread. Before every sample it drains the command
//! queue, then steps and publishes the frame, all under the session lock, so a
//! setpoint acknowledged over HTTP is carried by every frame published after
//! the acknowledgement. Frames fan out through a bounded broadcast channel;
//! a consumer that falls [`STREAM_BUFFER`] frames behind is disconnected
//! rather than slowing the loop.
//!
//! Telemetry events are named `frame` (a frame JSON with `run_id`) and
//! `stopped` (`{"run_id"}`). A new consumer first receives the latest frame of
//! the running loop, then every later one.
//!
//! Errors are `{"code", "message", "details"}` with codes `invalid_config`
//! (400), `invalid_request` (400), `not_found` (404), `conflict` (409),
//! `out_of_range` (422) and `internal` (500).

use std::convert::Infallible;
use std::future::Future;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::Stream;
use fuzzytherm_core::{ClosedLoop, ControlError, LoopConfig};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{broadcast, watch};

use crate::config::{from_json, ConfigError, RunConfigDoc};
use crate::trace::{frame_json, record_json, write_json};

/// Frames a telemetry consumer may lag behind before it is dropped.
pub const STREAM_BUFFER: usize = 1024;

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    /// Where finished records are stored as `<run_id>.json`.
    pub data_dir: PathBuf,
    /// Simulated seconds per wall-clock second.
    pub speed: f64,
    /// Used by `POST /runs` with an empty body and shown by an idle `/state`.
    pub default_config: Option<RunConfigDoc>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions {
            data_dir: PathBuf::from("runs"),
            speed: 1.0,
            default_config: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    Running,
    Stopped,
}

impl Phase {
    fn as_str(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Running => "running",
            Phase::Stopped => "stopped",
        }
    }
}

enum Command {
    SetSetpoint(f64),
    Stop,
}

#[derive(Clone)]
enum Message {
    Frame(Arc<str>),
    Stopped(Arc<str>),
}

struct Session {
    phase: Phase,
    run_id: Option<String>,
    config: Option<RunConfigDoc>,
    limits: (f64, f64),
    setpoint: Option<f64>,
    last_frame: Option<Value>,
    frames: usize,
    stopping: bool,
    error: Option<String>,
    commands: Option<mpsc::Sender<Command>>,
    worker: Option<JoinHandle<()>>,
}

struct Shared {
    session: Mutex<Session>,
    tx: broadcast::Sender<Message>,
    opts: ServiceOptions,
    counter: AtomicU64,
    shutdown: watch::Sender<bool>,
}

/// Cloneable handle to the service state.
#[derive(Clone)]
pub struct Service(Arc<Shared>);

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    details: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details: json!({}),
        }
    }

    fn details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn invalid_config(e: ConfigError) -> Self {
        let path = e.path().unwrap_or_default().to_string();
        Self::new(StatusCode::BAD_REQUEST, "invalid_config", e.to_string())
            .details(json!({ "path": path }))
    }

    fn out_of_range(value: f64, lo: f64, hi: f64) -> Self {
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "out_of_range",
            format!("setpoint {value} is outside [{lo}, {hi}]"),
        )
        .details(json!({ "value": value, "limits": [lo, hi] }))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "details": self.details });
        (self.status, Json(body)).into_response()
    }
}

fn lock(shared: &Shared) -> MutexGuard<'_, Session> {
    // a panicking worker must not take the API down with it
    shared.session.lock().unwrap_or_else(|p| p.into_inner())
}

fn valid_run_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

fn record_path(dir: &Path, run_id: &str) -> PathBuf {
    dir.join(format!("{run_id}.json"))
}

impl Service {
    pub fn new(opts: ServiceOptions) -> Self {
        let (tx, _) = broadcast::channel(STREAM_BUFFER);
        let (shutdown, _) = watch::channel(false);
        let limits = LoopConfig::default().setpoint_limits;
        Service(Arc::new(Shared {
            session: Mutex::new(Session {
                phase: Phase::Idle,
                run_id: None,
                config: None,
                limits,
                setpoint: None,
                last_frame: None,
                frames: 0,
                stopping: false,
                error: None,
                commands: None,
                worker: None,
            }),
            tx,
            opts,
            counter: AtomicU64::new(0),
            shutdown,
        }))
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/state", get(get_state))
            .route("/runs", post(start_run))
            .route("/runs/current/setpoint", post(set_setpoint))
            .route("/runs/current/stop", post(stop_run))
            .route("/runs/{id}/record", get(get_record))
            .route("/telemetry", get(telemetry))
            .with_state(self.clone())
    }

    pub fn state_json(&self) -> Value {
        let s = lock(&self.0);
        let mut obj = serde_json::Map::new();
        obj.insert("phase".into(), json!(s.phase.as_str()));
        if s.phase == Phase::Idle {
            if let Some(cfg) = &self.0.opts.default_config {
                obj.insert("config".into(), json!(cfg));
            }
            return Value::Object(obj);
        }
        obj.insert("run_id".into(), json!(s.run_id));
        obj.insert("config".into(), json!(s.config));
        obj.insert("setpoint".into(), json!(s.setpoint));
        obj.insert("limits".into(), json!([s.limits.0, s.limits.1]));
        obj.insert("frames".into(), json!(s.frames));
        obj.insert(
            "last_frame".into(),
            s.last_frame.clone().unwrap_or(Value::Null),
        );
        if s.phase == Phase::Stopped {
            let id = s.run_id.as_deref().unwrap_or_default();
            obj.insert("record".into(), json!(format!("/runs/{id}/record")));
        }
        if let Some(e) = &s.error {
            obj.insert("error".into(), json!(e));
        }
        Value::Object(obj)
    }

    /// Validates `doc` and launches the loop thread.
    pub fn start(&self, doc: RunConfigDoc) -> Result<String, ApiError> {
        let setup = doc.build().map_err(ApiError::invalid_config)?;
        let lp = ClosedLoop::new(setup.controller, setup.plant, setup.config)
            .map_err(|e| ApiError::invalid_config(ConfigError::invalid("loop", e)))?;
        std::fs::create_dir_all(&self.0.opts.data_dir).map_err(|e| {
            ApiError::internal(format!(
                "cannot create {}: {e}",
                self.0.opts.data_dir.display()
            ))
        })?;

        let mut s = lock(&self.0);
        if s.phase == Phase::Running {
            return Err(ApiError::conflict("a run is already active")
                .details(json!({ "run_id": s.run_id })));
        }
        let millis = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        let n = self.0.counter.fetch_add(1, Ordering::Relaxed) + 1;
        let run_id = format!("run-{millis}-{n}");
        let (cmd_tx, cmd_rx) = mpsc::channel();
        if let Some(old) = s.worker.take() {
            let _ = old.join();
        }
        *s = Session {
            phase: Phase::Running,
            run_id: Some(run_id.clone()),
            limits: setup.config.setpoint_limits,
            setpoint: Some(setup.config.setpoint),
            config: Some(doc.clone()),
            last_frame: None,
            frames: 0,
            stopping: false,
            error: None,
            commands: Some(cmd_tx),
            worker: None,
        };
        let shared = Arc::clone(&self.0);
        let id = run_id.clone();
        let worker = std::thread::Builder::new()
            .name(format!("loop-{run_id}"))
            .spawn(move || run_worker(shared, lp, doc, id, cmd_rx))
            .map_err(|e| ApiError::internal(format!("cannot start loop thread: {e}")))?;
        s.worker = Some(worker);
        Ok(run_id)
    }

    pub fn set_setpoint(&self, value: f64) -> Result<Value, ApiError> {
        let s = lock(&self.0);
        if s.phase != Phase::Running || s.stopping {
            return Err(ApiError::conflict("no run is active"));
        }
        let (lo, hi) = s.limits;
        if !(value.is_finite() && (lo..=hi).contains(&value)) {
            return Err(ApiError::out_of_range(value, lo, hi));
        }
        let sent = s
            .commands
            .as_ref()
            .is_some_and(|c| c.send(Command::SetSetpoint(value)).is_ok());
        if !sent {
            return Err(ApiError::conflict("the run has already finished"));
        }
        Ok(json!({ "run_id": s.run_id, "setpoint": value }))
    }

    /// Stops the active run and waits until its record is on disk.
    pub fn stop(&self) -> Result<Value, ApiError> {
        let worker = {
            let mut s = lock(&self.0);
            if s.phase != Phase::Running || s.stopping {
                return Err(ApiError::conflict("no run is active"));
            }
            s.stopping = true;
            if let Some(c) = &s.commands {
                let _ = c.send(Command::Stop);
            }
            s.worker.take()
        };
        if let Some(w) = worker {
            let _ = w.join();
        }
        let s = lock(&self.0);
        let id = s.run_id.clone().unwrap_or_default();
        Ok(json!({ "run_id": id, "frames": s.frames, "record": format!("/runs/{id}/record") }))
    }

    /// Stops any active run and ends every telemetry stream.
    pub fn shutdown(&self) {
        let _ = self.stop();
        let _ = self.0.shutdown.send(true);
    }

    pub fn record_bytes(&self, run_id: &str) -> Result<Vec<u8>, ApiError> {
        let not_found = || {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "not_found",
                format!("no record for run {run_id:?}"),
            )
        };
        if !valid_run_id(run_id) {
            return Err(not_found());
        }
        {
            let s = lock(&self.0);
            if s.phase == Phase::Running && s.run_id.as_deref() == Some(run_id) {
                return Err(ApiError::conflict("run is still active; stop it first"));
            }
        }
        match std::fs::read(record_path(&self.0.opts.data_dir, run_id)) {
            Ok(bytes) => Ok(bytes),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(not_found()),
            Err(e) => Err(ApiError::internal(e.to_string())),
        }
    }

    /// Latest frame (if running) and a receiver for everything after it.
    fn subscribe(&self) -> (Option<Arc<str>>, broadcast::Receiver<Message>) {
        let s = lock(&self.0);
        let first = match s.phase {
            Phase::Running => s.last_frame.as_ref().map(|f| Arc::from(f.to_string())),
            _ => None,
        };
        (first, self.0.tx.subscribe())
    }
}

fn run_worker(
    shared: Arc<Shared>,
    mut lp: ClosedLoop,
    doc: RunConfigDoc,
    run_id: String,
    rx: mpsc::Receiver<Command>,
) {
    let speed = shared.opts.speed;
    let pace =
        Duration::try_from_secs_f64(lp.config().sample_period / speed).unwrap_or(Duration::ZERO);
    let mut pending = Vec::new();
    let mut deadline = Instant::now();
    let mut failure = None;
    'run: loop {
        {
            let mut s = lock(&shared);
            pending.extend(rx.try_iter());
            for cmd in pending.drain(..) {
                match cmd {
                    Command::SetSetpoint(v) => {
                        if let Ok(v) = lp.set_setpoint(v) {
                            s.setpoint = Some(v);
                        }
                    }
                    Command::Stop => break 'run,
                }
            }
            match lp.step() {
                Ok(Some(frame)) => {
                    let value = frame_json(frame, Some(&run_id));
                    let text: Arc<str> = Arc::from(value.to_string());
                    s.last_frame = Some(value);
                    s.frames += 1;
                    let _ = shared.tx.send(Message::Frame(text));
                }
                Ok(None) => break,
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        if lp.is_finished() {
            break;
        }
        deadline += pace;
        loop {
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            match rx.recv_timeout(deadline - now) {
                Ok(Command::Stop) => break 'run,
                Ok(cmd) => pending.push(cmd),
                Err(mpsc::RecvTimeoutError::Timeout) => break,
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    std::thread::sleep(deadline.saturating_duration_since(Instant::now()));
                    break;
                }
            }
        }
    }
    let record = lp.finish();
    let bytes = {
        let mut buf = Vec::new();
        write_json(&record_json(&record, &run_id, &doc.controller), &mut buf).map(|_| buf)
    };
    let persisted = bytes.and_then(|b| persist(&shared.opts.data_dir, &run_id, &b));

    let mut s = lock(&shared);
    s.phase = Phase::Stopped;
    s.stopping = false;
    s.commands = None;
    s.frames = record.frames.len();
    s.error = match (failure, persisted) {
        (Some(e), _) => Some(describe(&e)),
        (None, Err(e)) => Some(format!("record not saved: {e}")),
        (None, Ok(())) => None,
    };
    let _ = shared.tx.send(Message::Stopped(Arc::from(run_id.as_str())));
}

fn describe(e: &ControlError) -> String {
    format!("loop stopped: {e}")
}

fn persist(dir: &Path, run_id: &str, bytes: &[u8]) -> io::Result<()> {
    let tmp = dir.join(format!(".{run_id}.json.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, record_path(dir, run_id))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> T + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))
}

async fn get_state(State(svc): State<Service>) -> Json<Value> {
    Json(svc.state_json())
}

async fn start_run(State(svc): State<Service>, body: Bytes) -> Result<Response, ApiError> {
    let doc = if body.iter().all(u8::is_ascii_whitespace) {
        svc.0.opts.default_config.clone().unwrap_or_default()
    } else {
        let text = std::str::from_utf8(&body).map_err(|_| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_request",
                "body is not UTF-8",
            )
        })?;
        from_json::<RunConfigDoc>(text).map_err(ApiError::invalid_config)?
    };
    let run_id = blocking(move || svc.start(doc)).await??;
    Ok((StatusCode::CREATED, Json(json!({ "run_id": run_id }))).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SetpointBody {
    value: f64,
}

async fn set_setpoint(State(svc): State<Service>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let text = std::str::from_utf8(&body).unwrap_or_default();
    let req: SetpointBody = from_json(text).map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string())
            .details(json!({ "path": e.path().unwrap_or_default() }))
    })?;
    Ok(Json(svc.set_setpoint(req.value)?))
}

async fn stop_run(State(svc): State<Service>) -> Result<Json<Value>, ApiError> {
    Ok(Json(blocking(move || svc.stop()).await??))
}

async fn get_record(
    State(svc): State<Service>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let bytes = blocking(move || svc.record_bytes(&id)).await??;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn telemetry(
    State(svc): State<Service>,
) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let (first, rx) = svc.subscribe();
    let shutdown = svc.0.shutdown.subscribe();
    let head =
        futures_util::stream::iter(first.map(|f| Ok(Event::default().event("frame").data(&*f))));
    let tail = futures_util::stream::unfold((rx, shutdown), |(mut rx, mut shutdown)| async move {
        if *shutdown.borrow() {
            return None;
        }
        let msg = tokio::select! {
            m = rx.recv() => m,
            _ = shutdown.changed() => return None,
        };
        let event = match msg {
            Ok(Message::Frame(f)) => Event::default().event("frame").data(&*f),
            Ok(Message::Stopped(id)) => Event::default()
                .event("stopped")
                .data(json!({ "run_id": &*id }).to_string()),
            // lagged past the buffer, or the service is gone
            Err(_) => return None,
        };
        Some((Ok(event), (rx, shutdown)))
    });
    Sse::new(futures_util::StreamExt::chain(head, tail)).keep_alive(KeepAlive::default())
}

/// Serves until `signal` resolves, then stops any active run (persisting its
/// record) and closes open streams.
pub async fn serve(
    listener: tokio::net::TcpListener,
    svc: Service,
    signal: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    let app = svc.router();
    let on_signal = svc.clone();
    axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            signal.await;
            let _ = tokio::task::spawn_blocking(move || on_signal.shutdown()).await;
        })
        .await
}
