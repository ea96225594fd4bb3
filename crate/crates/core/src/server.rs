//! Session server: a WebSocket wire API over the [`Router`] and a read-only
//! registry endpoint.
//!
//! * `GET /registry` returns the loaded inventory document verbatim.
//! * `GET /ws` upgrades to a WebSocket carrying newline-delimited JSON
//!   records `{"type", "session", "payload"}`.
//!
//! A connection starts with `open`. The DM wizard may open without a session
//! id to create one (payload `participant_label`, optional `phase`); any role
//! may attach to an existing session, optionally resuming after `since_seq`.
//! Each role can be held by one connection per session at a time. After
//! `open` the server streams every `event` the role is allowed to see.
//!
//! | type        | sent by      | payload                      |
//! |-------------|--------------|------------------------------|
//! | `utterance` | PARTICIPANT  | `{"text"}`                   |
//! | `press`     | DM_WIZARD    | `{"button_id", "bindings"?}` |
//! | `note`      | RN_WIZARD    | `{"text"}`                   |
//! | `close`     | any          | DM closes the session, others just leave |
//! | `event`     | server       | a `DialogueEvent`            |
//! | `error`     | server       | `{"code", "message"}`        |

use std::collections::HashSet;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::get;
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::broadcast::{self, error::RecvError};
use tokio::sync::mpsc;

use crate::router::{DialogueEvent, Phase, Role, Router, RouterError, SessionId};
use crate::template::SlotBinding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameType {
    Open,
    Utterance,
    Press,
    Note,
    Event,
    Error,
    Close,
}

/// One wire record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireFrame {
    #[serde(rename = "type")]
    pub kind: FrameType,
    #[serde(default)]
    pub session: Option<SessionId>,
    #[serde(default)]
    pub payload: Value,
}

impl WireFrame {
    pub fn new(kind: FrameType, session: Option<SessionId>, payload: Value) -> Self {
        WireFrame { kind, session, payload }
    }

    pub fn event(event: &DialogueEvent) -> Self {
        let payload = serde_json::to_value(event).expect("events serialize");
        WireFrame::new(FrameType::Event, Some(event.session_id.clone()), payload)
    }

    pub fn error(session: Option<SessionId>, code: &str, message: impl Into<String>) -> Self {
        let payload = json!({"code": code, "message": message.into()});
        WireFrame::new(FrameType::Error, session, payload)
    }

    /// The record as one line, newline included.
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("frames serialize");
        line.push('\n');
        line
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenPayload {
    pub role: Role,
    #[serde(default)]
    pub participant_label: Option<String>,
    #[serde(default)]
    pub phase: Option<Phase>,
    #[serde(default)]
    pub since_seq: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TextPayload {
    text: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PressPayload {
    button_id: String,
    #[serde(default)]
    bindings: SlotBinding,
}

/// Shared server state.
pub struct AppState {
    router: Arc<Router>,
    principals: Mutex<HashSet<(SessionId, Role)>>,
}

impl AppState {
    pub fn new(router: Arc<Router>) -> Arc<Self> {
        Arc::new(AppState { router, principals: Mutex::new(HashSet::new()) })
    }

    pub fn router(&self) -> &Arc<Router> {
        &self.router
    }
}

pub fn app(router: Arc<Router>) -> axum::Router {
    axum::Router::new()
        .route("/registry", get(registry))
        .route("/ws", get(upgrade))
        .with_state(AppState::new(router))
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, router: Arc<Router>) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "session server listening");
    }
    axum::serve(listener, app(router)).await
}

/// Binds `addr` and serves in a background task, returning the bound address.
pub async fn spawn(
    addr: SocketAddr,
    router: Arc<Router>,
) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((local, tokio::spawn(serve(listener, router))))
}

async fn registry(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    let source = state.router.registry().source().to_string();
    ([(header::CONTENT_TYPE, "application/json")], source)
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| Connection::new(state).run(socket))
}

/// The role this connection holds in a session; released on drop.
struct Attachment {
    state: Arc<AppState>,
    session: SessionId,
    role: Role,
    live: broadcast::Receiver<DialogueEvent>,
    last_seq: u64,
}

impl Drop for Attachment {
    fn drop(&mut self) {
        self.state.principals.lock().expect("principal lock").remove(&(self.session.clone(), self.role));
    }
}

struct Connection {
    state: Arc<AppState>,
    attachment: Option<Attachment>,
    out: mpsc::UnboundedSender<String>,
    out_rx: Option<mpsc::UnboundedReceiver<String>>,
    closing: bool,
}

impl Connection {
    fn new(state: Arc<AppState>) -> Self {
        let (out, out_rx) = mpsc::unbounded_channel();
        Connection { state, attachment: None, out, out_rx: Some(out_rx), closing: false }
    }

    async fn run(mut self, socket: WebSocket) {
        let (mut sink, mut stream) = socket.split();
        let mut out_rx = self.out_rx.take().expect("fresh connection");
        let writer = tokio::spawn(async move {
            while let Some(line) = out_rx.recv().await {
                if sink.send(Message::Text(line.into())).await.is_err() {
                    break;
                }
            }
            let _ = sink.close().await;
        });

        while !self.closing {
            tokio::select! {
                incoming = stream.next() => match incoming {
                    Some(Ok(Message::Text(text))) => {
                        for line in text.as_str().lines().filter(|l| !l.trim().is_empty()) {
                            self.handle_line(line);
                        }
                    }
                    Some(Ok(Message::Binary(_))) => {
                        self.send(WireFrame::error(None, "BAD_FRAME", "frames are UTF-8 text"));
                    }
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                    Some(Ok(_)) => {}
                },
                live = next_live(&mut self.attachment) => self.deliver(live),
            }
        }
        self.attachment = None;
        drop(self.out);
        let _ = writer.await;
    }

    fn send(&self, frame: WireFrame) {
        let _ = self.out.send(frame.to_line());
    }

    fn session_id(&self) -> Option<SessionId> {
        self.attachment.as_ref().map(|a| a.session.clone())
    }

    fn deliver(&mut self, live: Result<DialogueEvent, RecvError>) {
        let Some(att) = self.attachment.as_mut() else {
            return;
        };
        let events = match live {
            Ok(event) => vec![event],
            Err(RecvError::Lagged(missed)) => {
                tracing::warn!(session = %att.session, missed, "subscriber lagged, resyncing");
                self.state.router.export_transcript(&att.session).unwrap_or_default()
            }
            Err(RecvError::Closed) => Vec::new(),
        };
        let role = att.role;
        let mut frames = Vec::new();
        for event in events {
            if event.seq <= att.last_seq {
                continue;
            }
            att.last_seq = event.seq;
            if role.receives(&event) {
                frames.push(WireFrame::event(&event));
            }
        }
        for f in frames {
            self.send(f);
        }
    }

    fn handle_line(&mut self, line: &str) {
        let frame: WireFrame = match serde_json::from_str(line) {
            Ok(f) => f,
            Err(e) => {
                self.send(WireFrame::error(self.session_id(), "BAD_FRAME", e.to_string()));
                return;
            }
        };
        if let Err(err) = self.handle_frame(frame) {
            self.send(err);
        }
    }

    fn handle_frame(&mut self, frame: WireFrame) -> Result<(), WireFrame> {
        if frame.kind == FrameType::Open {
            return self.open(frame);
        }
        let (session, role) = match &self.attachment {
            Some(a) => (a.session.clone(), a.role),
            None => return Err(WireFrame::error(None, "NOT_OPEN", "send an open frame first")),
        };
        if frame.session.as_ref().is_some_and(|s| *s != session) {
            return Err(WireFrame::error(
                Some(session),
                "WRONG_SESSION",
                "connection is attached to another session",
            ));
        }
        let router = &self.state.router;
        let forbidden = |allowed: Role| {
            WireFrame::error(
                Some(session.clone()),
                "FORBIDDEN",
                format!("{} frames are only accepted from {}", wire_name(&frame.kind), wire_name(&allowed)),
            )
        };
        let bad_payload =
            |e: serde_json::Error| WireFrame::error(Some(session.clone()), "BAD_FRAME", e.to_string());
        let routed = match frame.kind {
            FrameType::Utterance => {
                if role != Role::Participant {
                    return Err(forbidden(Role::Participant));
                }
                let p: TextPayload = serde_json::from_value(frame.payload).map_err(bad_payload)?;
                router.ingest_utterance(&session, &p.text).map(drop)
            }
            FrameType::Press => {
                if role != Role::DmWizard {
                    return Err(forbidden(Role::DmWizard));
                }
                let p: PressPayload = serde_json::from_value(frame.payload).map_err(bad_payload)?;
                router.press_button(&session, &p.button_id, &p.bindings).map(drop)
            }
            FrameType::Note => {
                if role != Role::RnWizard {
                    return Err(forbidden(Role::RnWizard));
                }
                let p: TextPayload = serde_json::from_value(frame.payload).map_err(bad_payload)?;
                router.rn_note(&session, &p.text).map(drop)
            }
            FrameType::Close => {
                let result = if role == Role::DmWizard {
                    router.close_session(&session).map(|s| json!(s))
                } else {
                    router.session(&session).map(|s| json!(s))
                };
                self.closing = true;
                match result {
                    Ok(s) => {
                        self.send(WireFrame::new(FrameType::Close, Some(session), s));
                        return Ok(());
                    }
                    Err(e) => Err(e),
                }
            }
            FrameType::Event | FrameType::Error => {
                return Err(WireFrame::error(
                    Some(session),
                    "BAD_FRAME",
                    "event and error frames are server-to-client only",
                ))
            }
            FrameType::Open => unreachable!("handled above"),
        };
        routed.map_err(|e| router_error(Some(session.clone()), e))
    }

    fn open(&mut self, frame: WireFrame) -> Result<(), WireFrame> {
        if let Some(a) = &self.attachment {
            return Err(WireFrame::error(
                Some(a.session.clone()),
                "ALREADY_OPEN",
                "connection is already attached",
            ));
        }
        let p: OpenPayload = serde_json::from_value(frame.payload)
            .map_err(|e| WireFrame::error(frame.session.clone(), "BAD_FRAME", e.to_string()))?;
        let router = &self.state.router;
        let session = match frame.session {
            Some(id) => router.session(&id).map_err(|e| router_error(Some(id), e))?,
            None => {
                if p.role != Role::DmWizard {
                    return Err(WireFrame::error(
                        None,
                        "FORBIDDEN",
                        "only the DM wizard can start a session",
                    ));
                }
                let label = p
                    .participant_label
                    .as_deref()
                    .ok_or_else(|| WireFrame::error(None, "BAD_FRAME", "participant_label is required"))?;
                router
                    .open_session(label, p.phase.unwrap_or(Phase::Training))
                    .map_err(|e| router_error(None, e))?
            }
        };
        let id = session.id.clone();
        let claimed = self.state.principals.lock().expect("principal lock").insert((id.clone(), p.role));
        if !claimed {
            return Err(WireFrame::error(
                Some(id),
                "ROLE_TAKEN",
                format!("{} is already connected to this session", wire_name(&p.role)),
            ));
        }
        let since = p.since_seq.unwrap_or(0);
        let mut attachment = Attachment {
            state: self.state.clone(),
            session: id.clone(),
            role: p.role,
            last_seq: since,
            live: broadcast::channel(1).1,
        };
        let sub = router.subscribe(&id, since).map_err(|e| router_error(Some(id.clone()), e))?;
        attachment.live = sub.live;
        let payload = json!(session);
        self.send(WireFrame::new(FrameType::Open, Some(id), payload));
        for event in sub.backlog {
            attachment.last_seq = attachment.last_seq.max(event.seq);
            if p.role.receives(&event) {
                self.send(WireFrame::event(&event));
            }
        }
        self.attachment = Some(attachment);
        Ok(())
    }
}

async fn next_live(att: &mut Option<Attachment>) -> Result<DialogueEvent, RecvError> {
    match att {
        Some(a) => a.live.recv().await,
        None => std::future::pending().await,
    }
}

/// The spelling a value has on the wire.
fn wire_name<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(Value::String(s)) => s,
        _ => String::from("?"),
    }
}

fn router_error(session: Option<SessionId>, e: RouterError) -> WireFrame {
    WireFrame::error(session, e.code(), e.to_string())
}
