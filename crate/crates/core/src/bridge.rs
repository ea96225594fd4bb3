//! Bidirectional bridge between wizard-side framed messages and robot-side
//! topic messages.
//!
//! Wizard side, one frame per line: `MSG <scope> <kind> <body>`.
//! Robot side, one message per line: `PUB <topic> <k=v&k=v...>`.
//! Bodies, keys and values are percent-encoded. A [`MappingTable`] maps each
//! frame kind to exactly one topic and back; anything unmapped is counted and
//! dropped.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncRead, AsyncWrite, AsyncWriteExt, BufReader, BufWriter};
use tokio::net::TcpStream;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

/// Scope used when a rule does not name one.
pub const DEFAULT_SCOPE: &str = "woz";

const SCOPE_KEY: &str = "scope";

const WIRE_ESCAPES: &AsciiSet = &CONTROLS.add(b' ').add(b'%').add(b'&').add(b'=').add(b'+');

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("invalid mapping table: {0}")]
    InvalidTable(String),
    #[error("malformed line: {0}")]
    Malformed(String),
    #[error("connection to {endpoint} lost: {message}")]
    ConnectionLost { endpoint: String, message: String },
}

// --- messages --------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WizardFrame {
    pub scope: String,
    pub kind: String,
    pub body: String,
}

impl WizardFrame {
    pub fn new(scope: impl Into<String>, kind: impl Into<String>, body: impl Into<String>) -> Self {
        WizardFrame { scope: scope.into(), kind: kind.into(), body: body.into() }
    }

    pub fn encode(&self) -> String {
        format!("MSG {} {} {}", self.scope, self.kind, utf8_percent_encode(&self.body, WIRE_ESCAPES))
    }

    pub fn decode(line: &str) -> Result<Self, BridgeError> {
        let malformed = || BridgeError::Malformed(line.to_string());
        let mut parts = line.splitn(4, ' ');
        if parts.next() != Some("MSG") {
            return Err(malformed());
        }
        let scope = parts.next().filter(|s| !s.is_empty()).ok_or_else(malformed)?;
        let kind = parts.next().filter(|s| !s.is_empty()).ok_or_else(malformed)?;
        let body = decode_component(parts.next().unwrap_or("")).ok_or_else(malformed)?;
        Ok(WizardFrame::new(scope, kind, body))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TopicMessage {
    pub topic: String,
    pub payload: BTreeMap<String, String>,
}

impl TopicMessage {
    pub fn new<I, K, V>(topic: impl Into<String>, payload: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        TopicMessage {
            topic: topic.into(),
            payload: payload.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }

    pub fn encode(&self) -> String {
        let pairs: Vec<String> = self
            .payload
            .iter()
            .map(|(k, v)| {
                format!("{}={}", utf8_percent_encode(k, WIRE_ESCAPES), utf8_percent_encode(v, WIRE_ESCAPES))
            })
            .collect();
        format!("PUB {} {}", self.topic, pairs.join("&"))
    }

    pub fn decode(line: &str) -> Result<Self, BridgeError> {
        let malformed = || BridgeError::Malformed(line.to_string());
        let mut parts = line.splitn(3, ' ');
        if parts.next() != Some("PUB") {
            return Err(malformed());
        }
        let topic = parts.next().filter(|t| t.starts_with('/')).ok_or_else(malformed)?;
        let mut payload = BTreeMap::new();
        let pairs = parts.next().unwrap_or("");
        if !pairs.is_empty() {
            for pair in pairs.split('&') {
                let (k, v) = pair.split_once('=').ok_or_else(malformed)?;
                let k = decode_component(k).ok_or_else(malformed)?;
                let v = decode_component(v).ok_or_else(malformed)?;
                if payload.insert(k, v).is_some() {
                    return Err(malformed());
                }
            }
        }
        Ok(TopicMessage { topic: topic.to_string(), payload })
    }
}

fn decode_component(s: &str) -> Option<String> {
    percent_decode_str(s).decode_utf8().ok().map(|c| c.into_owned())
}

// --- mapping ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingRule {
    pub kind: String,
    pub topic: String,
    pub body_field: String,
    /// Scope given to frames coming back from the robot side.
    #[serde(default = "default_scope")]
    pub scope: String,
}

fn default_scope() -> String {
    DEFAULT_SCOPE.to_string()
}

/// A bijective kind ↔ topic table. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingTable {
    rules: Vec<MappingRule>,
}

impl MappingTable {
    pub fn new(rules: Vec<MappingRule>) -> Result<Self, BridgeError> {
        let invalid = |msg: String| Err(BridgeError::InvalidTable(msg));
        let mut kinds = HashSet::new();
        let mut topics = HashSet::new();
        for rule in &rules {
            if !is_token(&rule.kind) || !is_token(&rule.scope) {
                return invalid(format!("kind and scope must be non-empty words: {rule:?}"));
            }
            if !rule.topic.starts_with('/') || !is_token(&rule.topic) {
                return invalid(format!("topic must start with '/': {:?}", rule.topic));
            }
            if rule.body_field.is_empty() || rule.body_field == SCOPE_KEY {
                return invalid(format!("unusable body field {:?}", rule.body_field));
            }
            if !kinds.insert(rule.kind.as_str()) {
                return invalid(format!("kind {:?} is mapped twice", rule.kind));
            }
            if !topics.insert(rule.topic.as_str()) {
                return invalid(format!("topic {:?} is mapped twice", rule.topic));
            }
        }
        Ok(MappingTable { rules })
    }

    pub fn from_json(text: &str) -> Result<Self, BridgeError> {
        let rules: Vec<MappingRule> =
            serde_json::from_str(text).map_err(|e| BridgeError::InvalidTable(e.to_string()))?;
        Self::new(rules)
    }

    pub fn rules(&self) -> &[MappingRule] {
        &self.rules
    }

    pub fn to_robot_side(&self, frame: &WizardFrame) -> Option<TopicMessage> {
        let rule = self.rules.iter().find(|r| r.kind == frame.kind)?;
        let mut payload = BTreeMap::new();
        payload.insert(rule.body_field.clone(), frame.body.clone());
        if frame.scope != rule.scope {
            payload.insert(SCOPE_KEY.to_string(), frame.scope.clone());
        }
        Some(TopicMessage { topic: rule.topic.clone(), payload })
    }

    /// Maps back a message whose payload holds the rule's body field and,
    /// optionally, a scope. Messages carrying other fields are not mapped.
    pub fn to_wizard_side(&self, message: &TopicMessage) -> Option<WizardFrame> {
        let rule = self.rules.iter().find(|r| r.topic == message.topic)?;
        let body = message.payload.get(&rule.body_field)?;
        let scope = message.payload.get(SCOPE_KEY).unwrap_or(&rule.scope);
        let expected_len = 1 + usize::from(message.payload.contains_key(SCOPE_KEY));
        if message.payload.len() != expected_len || !is_token(scope) {
            return None;
        }
        Some(WizardFrame { scope: scope.clone(), kind: rule.kind.clone(), body: body.clone() })
    }
}

fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.contains(char::is_whitespace)
}

// --- counting --------------------------------------------------------------

#[derive(Debug, Default)]
pub struct DirectionStats {
    received: AtomicU64,
    forwarded: AtomicU64,
    dropped: AtomicU64,
}

impl DirectionStats {
    pub fn received(&self) -> u64 {
        self.received.load(Ordering::SeqCst)
    }

    pub fn forwarded(&self) -> u64 {
        self.forwarded.load(Ordering::SeqCst)
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Default)]
pub struct BridgeStats {
    pub to_robot: DirectionStats,
    pub to_wizard: DirectionStats,
    connection_losses: AtomicU64,
}

impl BridgeStats {
    pub fn connection_losses(&self) -> u64 {
        self.connection_losses.load(Ordering::SeqCst)
    }
}

impl fmt::Display for BridgeStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "wizard->robot in={} fwd={} drop={}; robot->wizard in={} fwd={} drop={}; reconnects={}",
            self.to_robot.received(),
            self.to_robot.forwarded(),
            self.to_robot.dropped(),
            self.to_wizard.received(),
            self.to_wizard.forwarded(),
            self.to_wizard.dropped(),
            self.connection_losses()
        )
    }
}

/// A mapping table plus drop accounting.
#[derive(Debug, Clone)]
pub struct Translator {
    table: Arc<MappingTable>,
    stats: Arc<BridgeStats>,
}

impl Translator {
    pub fn new(table: MappingTable) -> Self {
        Translator { table: Arc::new(table), stats: Arc::default() }
    }

    pub fn stats(&self) -> &Arc<BridgeStats> {
        &self.stats
    }

    pub fn frame_to_robot(&self, frame: &WizardFrame) -> Option<TopicMessage> {
        count(&self.stats.to_robot, self.table.to_robot_side(frame))
    }

    pub fn message_to_wizard(&self, message: &TopicMessage) -> Option<WizardFrame> {
        count(&self.stats.to_wizard, self.table.to_wizard_side(message))
    }

    /// Translates one wizard-side line into a robot-side line.
    pub fn line_to_robot(&self, line: &str) -> Option<String> {
        let mapped = WizardFrame::decode(line).ok().and_then(|f| self.table.to_robot_side(&f));
        count(&self.stats.to_robot, mapped).map(|m| m.encode())
    }

    /// Translates one robot-side line into a wizard-side line.
    pub fn line_to_wizard(&self, line: &str) -> Option<String> {
        let mapped = TopicMessage::decode(line).ok().and_then(|m| self.table.to_wizard_side(&m));
        count(&self.stats.to_wizard, mapped).map(|f| f.encode())
    }
}

fn count<T>(stats: &DirectionStats, mapped: Option<T>) -> Option<T> {
    stats.received.fetch_add(1, Ordering::SeqCst);
    match &mapped {
        Some(_) => stats.forwarded.fetch_add(1, Ordering::SeqCst),
        None => stats.dropped.fetch_add(1, Ordering::SeqCst),
    };
    mapped
}

// --- daemon ----------------------------------------------------------------

/// Reconnect delay: starts at `initial`, doubles per failure, capped at `max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Backoff {
    pub initial: Duration,
    pub max: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff { initial: Duration::from_millis(500), max: Duration::from_secs(8) }
    }
}

impl Backoff {
    /// Delays for consecutive failures, starting with the first.
    pub fn delays(self) -> impl Iterator<Item = Duration> {
        std::iter::successors(Some(self.initial), move |d| Some((*d * 2).min(self.max)))
    }
}

pub struct BridgeHandle {
    stats: Arc<BridgeStats>,
    errors: mpsc::UnboundedReceiver<BridgeError>,
    task: JoinHandle<()>,
}

impl BridgeHandle {
    pub fn stats(&self) -> &Arc<BridgeStats> {
        &self.stats
    }

    /// Next connection failure, as they happen. Reconnection carries on
    /// regardless of whether anyone listens.
    pub async fn next_error(&mut self) -> Option<BridgeError> {
        self.errors.recv().await
    }

    pub fn stop(self) {
        self.task.abort();
    }
}

/// Connects to both endpoints and forwards in both directions until stopped,
/// reconnecting with backoff whenever either side fails.
pub fn run_bridge(
    table: MappingTable,
    wizard: SocketAddr,
    robot: SocketAddr,
    backoff: Backoff,
) -> BridgeHandle {
    let translator = Translator::new(table);
    let stats = translator.stats().clone();
    let (err_tx, errors) = mpsc::unbounded_channel();
    let task = tokio::spawn(async move {
        let mut delays = backoff.delays();
        loop {
            let lost = match connect_pair(wizard, robot).await {
                Ok((wiz, bot)) => {
                    delays = backoff.delays();
                    tracing::info!(%wizard, %robot, "bridge connected");
                    run_connected(&translator, wiz, bot).await
                }
                Err(e) => e,
            };
            translator.stats.connection_losses.fetch_add(1, Ordering::SeqCst);
            tracing::warn!("{lost}");
            let _ = err_tx.send(lost);
            let delay = delays.next().expect("backoff never ends");
            tokio::time::sleep(delay).await;
        }
    });
    BridgeHandle { stats, errors, task }
}

async fn connect_pair(wizard: SocketAddr, robot: SocketAddr) -> Result<(TcpStream, TcpStream), BridgeError> {
    let connect = |addr: SocketAddr| async move {
        let stream = TcpStream::connect(addr).await.map_err(|e| BridgeError::ConnectionLost {
            endpoint: addr.to_string(),
            message: e.to_string(),
        })?;
        let _ = stream.set_nodelay(true);
        Ok::<_, BridgeError>(stream)
    };
    let wiz = connect(wizard).await?;
    let bot = connect(robot).await?;
    Ok((wiz, bot))
}

async fn run_connected(translator: &Translator, wizard: TcpStream, robot: TcpStream) -> BridgeError {
    let wizard_addr = peer(&wizard);
    let robot_addr = peer(&robot);
    let (wiz_read, wiz_write) = wizard.into_split();
    let (bot_read, bot_write) = robot.into_split();
    let to_robot = pump(wiz_read, bot_write, |line| translator.line_to_robot(line));
    let to_wizard = pump(bot_read, wiz_write, |line| translator.line_to_wizard(line));
    tokio::select! {
        end = to_robot => lost(end, &wizard_addr, &robot_addr),
        end = to_wizard => lost(end, &robot_addr, &wizard_addr),
    }
}

fn peer(stream: &TcpStream) -> String {
    stream.peer_addr().map(|a| a.to_string()).unwrap_or_else(|_| "?".into())
}

/// Which side of a pump ended it.
enum PumpEnd {
    ReaderClosed,
    Read(std::io::Error),
    Write(std::io::Error),
}

fn lost(end: PumpEnd, reader: &str, writer: &str) -> BridgeError {
    let (endpoint, message) = match end {
        PumpEnd::ReaderClosed => (reader, "closed by peer".to_string()),
        PumpEnd::Read(e) => (reader, e.to_string()),
        PumpEnd::Write(e) => (writer, e.to_string()),
    };
    BridgeError::ConnectionLost { endpoint: endpoint.to_string(), message }
}

/// Reads lines, translates each, writes the ones that map. Flushes whenever
/// the input runs dry so batches go out together.
async fn pump<R, W>(reader: R, writer: W, translate: impl Fn(&str) -> Option<String>) -> PumpEnd
where
    R: AsyncRead + Unpin,
    W: AsyncWrite + Unpin,
{
    let mut reader = BufReader::with_capacity(64 * 1024, reader);
    let mut writer = BufWriter::with_capacity(64 * 1024, writer);
    let mut line = String::new();
    loop {
        line.clear();
        match reader.read_line(&mut line).await {
            Ok(0) => {
                let _ = writer.flush().await;
                return PumpEnd::ReaderClosed;
            }
            Ok(_) => {}
            Err(e) => return PumpEnd::Read(e),
        }
        let text = line.trim_end_matches(['\n', '\r']);
        if let Some(out) = translate(text) {
            let written = async {
                writer.write_all(out.as_bytes()).await?;
                writer.write_all(b"\n").await
            };
            if let Err(e) = written.await {
                return PumpEnd::Write(e);
            }
        }
        if reader.buffer().is_empty() {
            if let Err(e) = writer.flush().await {
                return PumpEnd::Write(e);
            }
        }
    }
}
