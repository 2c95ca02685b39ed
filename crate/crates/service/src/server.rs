//! Async transport: TCP ingest and telemetry ports plus an HTTP listener with
//! the WebSocket endpoints `/telemetry`, `/control` and `/ingest-b64`.

use std::collections::BTreeMap;
use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use base64::Engine;
use futures::{SinkExt, StreamExt};
use glide_core::technique::TechniqueKind;
use glide_core::{ConfigError, Settings};
use serde::Deserialize;
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tracing::{debug, info, warn};

use crate::protocol::{ControlError, Inbound, ProtocolError, StreamParser, CONTROL_PREFIX};
use crate::session::{ControlOutcome, Session, DEFAULT_TELEMETRY_RATE_HZ};

/// Telemetry lines buffered per session before slow subscribers start losing
/// the oldest ones.
const TELEMETRY_BUFFER: usize = 8192;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub ingest_addr: SocketAddr,
    pub telemetry_addr: SocketAddr,
    pub http_addr: SocketAddr,
    pub technique: TechniqueKind,
    pub settings: Settings,
    pub telemetry_rate_hz: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            ingest_addr: ([127, 0, 0, 1], 7400).into(),
            telemetry_addr: ([127, 0, 0, 1], 7401).into(),
            http_addr: ([127, 0, 0, 1], 7402).into(),
            technique: TechniqueKind::Gip,
            settings: Settings::default(),
            telemetry_rate_hz: DEFAULT_TELEMETRY_RATE_HZ,
        }
    }
}

impl ServiceConfig {
    /// Loopback config with OS-assigned ports.
    pub fn ephemeral() -> Self {
        let any: SocketAddr = ([127, 0, 0, 1], 0).into();
        Self { ingest_addr: any, telemetry_addr: any, http_addr: any, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ServeError> {
        let ports = [self.ingest_addr.port(), self.telemetry_addr.port(), self.http_addr.port()];
        for (i, a) in ports.iter().enumerate() {
            if *a != 0 && ports[i + 1..].contains(a) {
                return Err(ServeError::PortsNotDistinct(*a));
            }
        }
        if !(self.telemetry_rate_hz.is_finite() && self.telemetry_rate_hz > 0.0) {
            return Err(ServeError::Config(ConfigError::BadValue {
                key: "telemetry_rate_hz".into(),
                value: self.telemetry_rate_hz.to_string(),
            }));
        }
        self.settings.validate()?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error("port {0} is used for more than one listener")]
    PortsNotDistinct(u16),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("server failed: {0}")]
    Io(#[from] io::Error),
}

/// A control line routed to the task that owns a session.
struct ControlRequest {
    line: String,
    reply: mpsc::UnboundedSender<String>,
}

#[derive(Clone)]
struct SessionHandle {
    control: mpsc::UnboundedSender<ControlRequest>,
    telemetry: broadcast::Sender<Arc<str>>,
}

/// Registry of live sessions. Only handles are shared; each session's state
/// stays inside the task that reads its ingest connection.
struct Hub {
    next_id: AtomicU64,
    sessions: Mutex<BTreeMap<u64, SessionHandle>>,
    technique: TechniqueKind,
    settings: Settings,
    telemetry_rate_hz: f64,
}

impl Hub {
    fn open(&self) -> (Session, SessionHandle, mpsc::UnboundedReceiver<ControlRequest>) {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed) + 1;
        let (control, requests) = mpsc::unbounded_channel();
        let (telemetry, _) = broadcast::channel(TELEMETRY_BUFFER);
        let handle = SessionHandle { control, telemetry };
        self.sessions.lock().unwrap().insert(id, handle.clone());
        (Session::new(id, self.technique, self.settings, self.telemetry_rate_hz), handle, requests)
    }

    fn close(&self, id: u64) {
        self.sessions.lock().unwrap().remove(&id);
    }

    /// A named session, or the newest one when `id` is absent.
    fn find(&self, id: Option<u64>) -> Option<(u64, SessionHandle)> {
        let sessions = self.sessions.lock().unwrap();
        match id {
            Some(id) => sessions.get(&id).map(|h| (id, h.clone())),
            None => sessions.iter().next_back().map(|(id, h)| (*id, h.clone())),
        }
    }
}

/// Who gets the answer to a deferred `calibrate`.
enum Requester {
    Local,
    Remote(mpsc::UnboundedSender<String>),
}

/// Per-connection ingest state: the session plus whatever is needed to route
/// replies and publish telemetry.
struct Ingest {
    session: Session,
    parser: StreamParser,
    telemetry: broadcast::Sender<Arc<str>>,
    replies: mpsc::UnboundedSender<String>,
    calibration: Option<Requester>,
}

impl Ingest {
    fn reply(&self, to: Requester, line: String) {
        match to {
            Requester::Local => drop(self.replies.send(line)),
            Requester::Remote(tx) => drop(tx.send(line)),
        }
    }

    fn control(&mut self, line: &str, from: Requester) {
        match self.session.control(line) {
            ControlOutcome::Reply(r) => self.reply(from, r),
            ControlOutcome::Deferred => {
                if let Some(prev) = self.calibration.replace(from) {
                    self.reply(prev, ControlError::Superseded.reply());
                }
            }
        }
    }

    fn feed(&mut self, bytes: &[u8], received: Instant) -> Result<(), ProtocolError> {
        self.parser.push(bytes);
        while let Some(item) = self.parser.next_item()? {
            match item {
                Inbound::Line(line) => self.control(&line, Requester::Local),
                Inbound::Frame(frame) => {
                    let out = self.session.ingest(&frame, received)?;
                    if let Some(rec) = out.telemetry {
                        if self.telemetry.receiver_count() > 0 {
                            let json = serde_json::to_string(&rec).expect("telemetry record serializes");
                            let _ = self.telemetry.send(json.into());
                        }
                    }
                    if let Some(r) = out.calibration {
                        if let Some(to) = self.calibration.take() {
                            self.reply(to, r);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

pub struct Server {
    ingest: TcpListener,
    telemetry: TcpListener,
    http: TcpListener,
    hub: Arc<Hub>,
}

impl Server {
    pub async fn bind(cfg: ServiceConfig) -> Result<Self, ServeError> {
        cfg.validate()?;
        let bind = |addr: SocketAddr| async move {
            TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })
        };
        let hub = Hub {
            next_id: AtomicU64::new(0),
            sessions: Mutex::new(BTreeMap::new()),
            technique: cfg.technique,
            settings: cfg.settings,
            telemetry_rate_hz: cfg.telemetry_rate_hz,
        };
        Ok(Self {
            ingest: bind(cfg.ingest_addr).await?,
            telemetry: bind(cfg.telemetry_addr).await?,
            http: bind(cfg.http_addr).await?,
            hub: Arc::new(hub),
        })
    }

    pub fn ingest_addr(&self) -> SocketAddr {
        self.ingest.local_addr().expect("bound listener")
    }

    pub fn telemetry_addr(&self) -> SocketAddr {
        self.telemetry.local_addr().expect("bound listener")
    }

    pub fn http_addr(&self) -> SocketAddr {
        self.http.local_addr().expect("bound listener")
    }

    pub async fn run(self) -> Result<(), ServeError> {
        self.run_until(std::future::pending()).await
    }

    pub async fn run_until(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
        info!(
            ingest = %self.ingest_addr(),
            telemetry = %self.telemetry_addr(),
            http = %self.http_addr(),
            "serving"
        );
        let Server { ingest, telemetry, http, hub } = self;
        let app = Router::new()
            .route("/telemetry", get(ws_telemetry))
            .route("/control", get(ws_control))
            .route("/ingest-b64", get(ws_ingest))
            .with_state(hub.clone());
        let http_task = tokio::spawn(async move { axum::serve(http, app).await });

        let accept = async {
            loop {
                tokio::select! {
                    conn = ingest.accept() => {
                        let (stream, peer) = conn?;
                        debug!(%peer, "ingest connection");
                        tokio::spawn(tcp_ingest(hub.clone(), stream));
                    }
                    conn = telemetry.accept() => {
                        let (stream, peer) = conn?;
                        debug!(%peer, "telemetry connection");
                        tokio::spawn(tcp_telemetry(hub.clone(), stream));
                    }
                }
            }
            #[allow(unreachable_code)]
            Ok::<(), io::Error>(())
        };
        let result = tokio::select! {
            r = accept => r.map_err(ServeError::from),
            _ = shutdown => Ok(()),
        };
        http_task.abort();
        result
    }
}

async fn tcp_ingest(hub: Arc<Hub>, stream: TcpStream) {
    let _ = stream.set_nodelay(true);
    let (mut rd, mut wr) = stream.into_split();
    let (session, handle, mut requests) = hub.open();
    let id = session.id();
    let (replies, mut outbox) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        while let Some(mut line) = outbox.recv().await {
            line.push('\n');
            if wr.write_all(line.as_bytes()).await.is_err() {
                break;
            }
        }
        let _ = wr.shutdown().await;
    });
    let _ = replies.send(format!("ok session {id}"));
    let mut ingest = Ingest { session, parser: StreamParser::default(), telemetry: handle.telemetry, replies, calibration: None };

    let mut buf = vec![0u8; 16 * 1024];
    loop {
        tokio::select! {
            n = rd.read(&mut buf) => {
                let n = match n {
                    Ok(0) | Err(_) => break,
                    Ok(n) => n,
                };
                if let Err(e) = ingest.feed(&buf[..n], Instant::now()) {
                    warn!(session = id, error = %e, "closing ingest connection");
                    let _ = ingest.replies.send(format!("err protocol {e}"));
                    break;
                }
            }
            Some(req) = requests.recv() => ingest.control(&req.line, Requester::Remote(req.reply)),
        }
    }
    hub.close(id);
    drop(ingest);
    let _ = writer.await;
}

async fn tcp_telemetry(hub: Arc<Hub>, stream: TcpStream) {
    let _ = stream.set_nodelay(true);
    let (rd, mut wr) = stream.into_split();
    let mut lines = BufReader::new(rd).lines();
    let Ok(Some(first)) = lines.next_line().await else { return };
    let target = match first.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["subscribe"] => Ok(None),
        ["subscribe", id] => id.parse::<u64>().map(Some).map_err(|_| "err bad-value session".to_string()),
        _ => Err(ControlError::UnknownCommand.reply()),
    };
    let found = target.and_then(|id| hub.find(id).ok_or_else(|| "err unknown-session".to_string()));
    let (id, handle) = match found {
        Ok(found) => found,
        Err(e) => {
            let _ = wr.write_all(format!("{e}\n").as_bytes()).await;
            return;
        }
    };
    let mut rx = handle.telemetry.subscribe();
    drop(handle);
    if wr.write_all(format!("ok subscribe {id}\n").as_bytes()).await.is_err() {
        return;
    }
    loop {
        match rx.recv().await {
            Ok(json) => {
                let mut line = Vec::with_capacity(json.len() + 1);
                line.extend_from_slice(json.as_bytes());
                line.push(b'\n');
                if wr.write_all(&line).await.is_err() {
                    return;
                }
            }
            Err(broadcast::error::RecvError::Lagged(n)) => debug!(session = id, skipped = n, "slow subscriber"),
            Err(broadcast::error::RecvError::Closed) => return,
        }
    }
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    session: Option<u64>,
}

async fn ws_telemetry(ws: WebSocketUpgrade, Query(q): Query<SessionQuery>, State(hub): State<Arc<Hub>>) -> Response {
    ws.on_upgrade(move |socket| async move {
        let (mut tx, mut rx) = socket.split();
        let Some((id, handle)) = hub.find(q.session) else {
            let _ = tx.send(Message::Text("err unknown-session".into())).await;
            return;
        };
        let mut sub = handle.telemetry.subscribe();
        drop(handle);
        loop {
            tokio::select! {
                msg = sub.recv() => match msg {
                    Ok(json) => {
                        if tx.send(Message::Text((*json).into())).await.is_err() {
                            return;
                        }
                    }
                    Err(broadcast::error::RecvError::Lagged(n)) => debug!(session = id, skipped = n, "slow subscriber"),
                    Err(broadcast::error::RecvError::Closed) => return,
                },
                incoming = rx.next() => if !matches!(incoming, Some(Ok(_))) {
                    return;
                },
            }
        }
    })
}

async fn ws_control(ws: WebSocketUpgrade, Query(q): Query<SessionQuery>, State(hub): State<Arc<Hub>>) -> Response {
    ws.on_upgrade(move |socket| async move {
        let (mut tx, mut rx) = socket.split();
        let Some((_, handle)) = hub.find(q.session) else {
            let _ = tx.send(Message::Text("err unknown-session".into())).await;
            return;
        };
        let (reply_tx, mut reply_rx) = mpsc::unbounded_channel();
        loop {
            tokio::select! {
                incoming = rx.next() => match incoming {
                    Some(Ok(Message::Text(text))) => {
                        let line = text.trim().trim_start_matches(CONTROL_PREFIX as char).to_string();
                        let req = ControlRequest { line, reply: reply_tx.clone() };
                        if handle.control.send(req).is_err() {
                            let _ = tx.send(Message::Text("err unknown-session".into())).await;
                            return;
                        }
                    }
                    Some(Ok(_)) => {}
                    _ => return,
                },
                Some(reply) = reply_rx.recv() => {
                    if tx.send(Message::Text(reply.into())).await.is_err() {
                        return;
                    }
                }
            }
        }
    })
}

/// Text messages are either `!`-prefixed control lines or one base64 frame;
/// binary messages carry raw frame bytes.
fn ws_payload(msg: Message) -> Result<Option<Vec<u8>>, ProtocolError> {
    match msg {
        Message::Text(text) => {
            let text = text.as_str().trim();
            if text.as_bytes().first() == Some(&CONTROL_PREFIX) {
                Ok(Some(format!("{text}\n").into_bytes()))
            } else {
                base64::engine::general_purpose::STANDARD.decode(text).map(Some).map_err(|_| ProtocolError::Base64)
            }
        }
        Message::Binary(bytes) => Ok(Some(bytes.to_vec())),
        _ => Ok(None),
    }
}

async fn ws_ingest(ws: WebSocketUpgrade, State(hub): State<Arc<Hub>>) -> Response {
    ws.on_upgrade(move |socket: WebSocket| async move {
        let (mut tx, mut rx) = socket.split();
        let (session, handle, mut requests) = hub.open();
        let id = session.id();
        let (replies, mut outbox) = mpsc::unbounded_channel::<String>();
        let _ = replies.send(format!("ok session {id}"));
        let mut ingest =
            Ingest { session, parser: StreamParser::default(), telemetry: handle.telemetry, replies, calibration: None };
        loop {
            tokio::select! {
                incoming = rx.next() => {
                    let Some(Ok(msg)) = incoming else { break };
                    let received = Instant::now();
                    let fed = ws_payload(msg).and_then(|p| match p {
                        Some(bytes) => ingest.feed(&bytes, received),
                        None => Ok(()),
                    });
                    if let Err(e) = fed {
                        warn!(session = id, error = %e, "closing ingest connection");
                        let _ = ingest.replies.send(format!("err protocol {e}"));
                        break;
                    }
                }
                Some(req) = requests.recv() => ingest.control(&req.line, Requester::Remote(req.reply)),
                Some(line) = outbox.recv() => {
                    if tx.send(Message::Text(line.into())).await.is_err() {
                        break;
                    }
                }
            }
        }
        hub.close(id);
        drop(ingest);
        while let Some(line) = outbox.recv().await {
            if tx.send(Message::Text(line.into())).await.is_err() {
                break;
            }
        }
        let _ = tx.close().await;
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ports_must_differ() {
        let mut cfg = ServiceConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.http_addr = cfg.ingest_addr;
        assert!(matches!(cfg.validate(), Err(ServeError::PortsNotDistinct(7400))));
        assert!(ServiceConfig::ephemeral().validate().is_ok());
    }

    #[test]
    fn ws_text_payloads() {
        let frame = glide_core::pressure::PressureFrame::new(7, 1, 2, 3, 4).unwrap();
        let raw = glide_core::pressure::encode_frame(&frame);
        let b64 = base64::engine::general_purpose::STANDARD.encode(raw);
        assert_eq!(ws_payload(Message::Text(b64.into())).unwrap().unwrap(), raw.to_vec());
        assert_eq!(ws_payload(Message::Text("!ping".into())).unwrap().unwrap(), b"!ping\n".to_vec());
        assert_eq!(ws_payload(Message::Text("not base64!".into())), Err(ProtocolError::Base64));
    }
}
