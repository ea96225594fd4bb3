//! Session management and three-role message routing.
//!
//! The participant's utterances go to the dialogue-manager (DM) wizard. Each
//! DM button press is delivered to exactly one chat channel: the participant's
//! or the robot-navigator (RN) wizard's. The RN wizard can post status notes
//! back to the DM. Every accepted operation appends one event to the session
//! transcript; rejected operations append nothing.

pub mod transcript;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::broadcast;

use crate::environment::EnvironmentMap;
use crate::inventory::{InventoryError, MessageFunction, Recipient, Registry};
use crate::template::{EntityResolver, SlotBinding, TemplateError};

pub use transcript::{TranscriptError, TranscriptWriter};

/// Time budget of each main task phase, in seconds.
pub const MAIN_PHASE_BUDGET_SECS: u64 = 20 * 60;

const EVENT_BUFFER: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Participant,
    DmWizard,
    RnWizard,
}

impl Role {
    /// Which events a connected principal in this role gets to see. The DM
    /// wizard monitors both channels.
    pub fn receives(self, event: &DialogueEvent) -> bool {
        match self {
            Role::DmWizard => true,
            Role::Participant => event.channel == Channel::ParticipantChat,
            Role::RnWizard => event.channel == Channel::RnChat,
        }
    }
}

impl From<Recipient> for Role {
    fn from(r: Recipient) -> Self {
        match r {
            Recipient::Participant => Role::Participant,
            Recipient::RnWizard => Role::RnWizard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Channel {
    ParticipantChat,
    RnChat,
}

impl Channel {
    /// The channel of the conversation between the DM and `party`.
    pub fn for_party(party: Role) -> Option<Channel> {
        match party {
            Role::Participant => Some(Channel::ParticipantChat),
            Role::RnWizard => Some(Channel::RnChat),
            Role::DmWizard => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Training,
    Main1,
    Main2,
}

impl Phase {
    pub fn budget_secs(self) -> Option<u64> {
        match self {
            Phase::Training => None,
            Phase::Main1 | Phase::Main2 => Some(MAIN_PHASE_BUDGET_SECS),
        }
    }

    pub fn next(self) -> Option<Phase> {
        match self {
            Phase::Training => Some(Phase::Main1),
            Phase::Main1 => Some(Phase::Main2),
            Phase::Main2 => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

impl SessionId {
    pub fn new(id: impl Into<String>) -> Self {
        SessionId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Snapshot of a session's state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: SessionId,
    pub participant_label: String,
    pub phase: Phase,
    pub time_budget_secs: Option<u64>,
    pub seq_counter: u64,
    pub status: SessionStatus,
    pub phase_started_ms: u64,
    /// Set once an event is admitted after the phase budget ran out.
    pub budget_exceeded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Origin {
    Button,
    FreeText,
    IngestedUtterance,
}

/// One routed message. Field order is the transcript log's field order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialogueEvent {
    pub session_id: SessionId,
    pub seq: u64,
    pub ts_ms: u64,
    pub sender: Role,
    pub recipient: Role,
    pub channel: Channel,
    pub text: String,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub button_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bindings: Option<SlotBinding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<MessageFunction>,
}

#[derive(Debug, Error)]
pub enum RouterError {
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("session {0} is closed")]
    SessionClosed(SessionId),
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error(transparent)]
    UnknownButton(InventoryError),
    #[error(transparent)]
    ConstraintViolation(TemplateError),
    #[error("session {id} cannot advance past {phase:?}")]
    InvalidPhaseTransition { id: SessionId, phase: Phase },
    #[error("transcript log: {0}")]
    Log(#[from] std::io::Error),
}

impl RouterError {
    pub fn code(&self) -> &'static str {
        match self {
            RouterError::UnknownSession(_) => "UNKNOWN_SESSION",
            RouterError::SessionClosed(_) => "SESSION_CLOSED",
            RouterError::EmptyUtterance => "EMPTY_UTTERANCE",
            RouterError::UnknownButton(_) => "UNKNOWN_BUTTON",
            RouterError::ConstraintViolation(_) => "CONSTRAINT_VIOLATION",
            RouterError::InvalidPhaseTransition { .. } => "INVALID_PHASE_TRANSITION",
            RouterError::Log(_) => "LOG",
        }
    }
}

/// Server clock. Clients never supply timestamps.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        ManualClock(AtomicU64::new(start_ms))
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

impl<C: Clock + ?Sized> Clock for Arc<C> {
    fn now_ms(&self) -> u64 {
        (**self).now_ms()
    }
}

struct SessionState {
    session: Session,
    last_ts: u64,
    log: Option<TranscriptWriter>,
}

struct SessionSlot {
    state: Mutex<SessionState>,
    transcript: RwLock<Vec<DialogueEvent>>,
    events: broadcast::Sender<DialogueEvent>,
}

/// What a new subscriber gets: events it missed, then the live feed.
pub struct Subscription {
    pub backlog: Vec<DialogueEvent>,
    pub live: broadcast::Receiver<DialogueEvent>,
}

struct Draft {
    sender: Role,
    recipient: Role,
    text: String,
    origin: Origin,
    button_id: Option<String>,
    bindings: Option<SlotBinding>,
    function: Option<MessageFunction>,
}

/// Routes messages for any number of concurrent sessions.
pub struct Router {
    registry: RwLock<Arc<Registry>>,
    entities: Option<Arc<EnvironmentMap>>,
    sessions: RwLock<HashMap<SessionId, Arc<SessionSlot>>>,
    clock: Arc<dyn Clock>,
    log_dir: Option<PathBuf>,
}

impl Router {
    pub fn new(registry: Arc<Registry>) -> Self {
        Router {
            registry: RwLock::new(registry),
            entities: None,
            sessions: RwLock::new(HashMap::new()),
            clock: Arc::new(SystemClock),
            log_dir: None,
        }
    }

    /// Validates `ENTITY_ID` slot fills against this map.
    pub fn with_environment(mut self, map: Arc<EnvironmentMap>) -> Self {
        self.entities = Some(map);
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Writes one `<session id>.jsonl` transcript per session under `dir`.
    pub fn with_log_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.log_dir = Some(dir.into());
        self
    }

    pub fn registry(&self) -> Arc<Registry> {
        self.registry.read().expect("registry lock").clone()
    }

    /// Swaps in a freshly loaded registry. Presses already admitted keep the
    /// text they were sent with.
    pub fn replace_registry(&self, registry: Arc<Registry>) {
        *self.registry.write().expect("registry lock") = registry;
    }

    fn slot(&self, id: &SessionId) -> Result<Arc<SessionSlot>, RouterError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| RouterError::UnknownSession(id.clone()))
    }

    pub fn open_session(&self, participant_label: &str, phase: Phase) -> Result<Session, RouterError> {
        let id = SessionId(format!("s-{}", uuid::Uuid::new_v4().simple()));
        let now = self.clock.now_ms();
        let session = Session {
            id: id.clone(),
            participant_label: participant_label.to_string(),
            phase,
            time_budget_secs: phase.budget_secs(),
            seq_counter: 0,
            status: SessionStatus::Open,
            phase_started_ms: now,
            budget_exceeded: false,
        };
        let log = match &self.log_dir {
            Some(dir) => Some(TranscriptWriter::append_to(dir.join(format!("{id}.jsonl")))?),
            None => None,
        };
        let slot = SessionSlot {
            state: Mutex::new(SessionState { session: session.clone(), last_ts: now, log }),
            transcript: RwLock::new(Vec::new()),
            events: broadcast::channel(EVENT_BUFFER).0,
        };
        self.sessions.write().expect("session table lock").insert(id.clone(), Arc::new(slot));
        tracing::info!(session = %id, participant = participant_label, ?phase, "session opened");
        Ok(session)
    }

    pub fn session(&self, id: &SessionId) -> Result<Session, RouterError> {
        let slot = self.slot(id)?;
        let state = slot.state.lock().expect("session lock");
        Ok(state.session.clone())
    }

    pub fn session_ids(&self) -> Vec<SessionId> {
        let mut ids: Vec<_> = self.sessions.read().expect("session table lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn ingest_utterance(&self, id: &SessionId, text: &str) -> Result<DialogueEvent, RouterError> {
        if text.trim().is_empty() {
            return Err(RouterError::EmptyUtterance);
        }
        self.admit(id, || {
            Ok(Draft {
                sender: Role::Participant,
                recipient: Role::DmWizard,
                text: text.to_string(),
                origin: Origin::IngestedUtterance,
                button_id: None,
                bindings: None,
                function: None,
            })
        })
    }

    pub fn press_button(
        &self,
        id: &SessionId,
        button_id: &str,
        bindings: &SlotBinding,
    ) -> Result<DialogueEvent, RouterError> {
        let registry = self.registry();
        let resolver = self.entities.as_deref().map(|m| m as &dyn EntityResolver);
        self.admit(id, || {
            let button = registry.lookup(button_id).map_err(RouterError::UnknownButton)?;
            let text = button.template.fill(bindings, resolver).map_err(RouterError::ConstraintViolation)?;
            Ok(Draft {
                sender: Role::DmWizard,
                recipient: button.recipient.into(),
                text,
                origin: Origin::Button,
                button_id: Some(button.id.clone()),
                bindings: (!button.template.is_literal()).then(|| bindings.clone()),
                function: Some(button.function),
            })
        })
    }

    pub fn rn_note(&self, id: &SessionId, text: &str) -> Result<DialogueEvent, RouterError> {
        if text.trim().is_empty() {
            return Err(RouterError::EmptyUtterance);
        }
        self.admit(id, || {
            Ok(Draft {
                sender: Role::RnWizard,
                recipient: Role::DmWizard,
                text: text.to_string(),
                origin: Origin::FreeText,
                button_id: None,
                bindings: None,
                function: None,
            })
        })
    }

    /// Admits one event under the session lock: seq order, timestamps, log
    /// and live delivery all follow admission order.
    fn admit(
        &self,
        id: &SessionId,
        draft: impl FnOnce() -> Result<Draft, RouterError>,
    ) -> Result<DialogueEvent, RouterError> {
        let slot = self.slot(id)?;
        let mut state = slot.state.lock().expect("session lock");
        if state.session.status == SessionStatus::Closed {
            return Err(RouterError::SessionClosed(id.clone()));
        }
        let draft = draft()?;
        let party = match draft.sender {
            Role::DmWizard => draft.recipient,
            other => other,
        };
        let channel = Channel::for_party(party).expect("one side of every event is not the DM");

        let ts_ms = self.clock.now_ms().max(state.last_ts);
        let event = DialogueEvent {
            session_id: id.clone(),
            seq: state.session.seq_counter + 1,
            ts_ms,
            sender: draft.sender,
            recipient: draft.recipient,
            channel,
            text: draft.text,
            origin: draft.origin,
            button_id: draft.button_id,
            bindings: draft.bindings,
            function: draft.function,
        };
        if let Some(log) = state.log.as_mut() {
            log.append(&event)?;
        }
        state.session.seq_counter = event.seq;
        state.last_ts = ts_ms;
        if let Some(budget) = state.session.time_budget_secs {
            let elapsed = ts_ms.saturating_sub(state.session.phase_started_ms);
            if !state.session.budget_exceeded && elapsed > budget * 1000 {
                state.session.budget_exceeded = true;
                tracing::warn!(session = %id, elapsed_ms = elapsed, "phase time budget exceeded");
            }
        }
        slot.transcript.write().expect("transcript lock").push(event.clone());
        // no live subscribers is fine; the transcript has it
        let _ = slot.events.send(event.clone());
        Ok(event)
    }

    pub fn advance_phase(&self, id: &SessionId) -> Result<Session, RouterError> {
        let slot = self.slot(id)?;
        let mut state = slot.state.lock().expect("session lock");
        if state.session.status == SessionStatus::Closed {
            return Err(RouterError::SessionClosed(id.clone()));
        }
        let phase = state.session.phase;
        let next =
            phase.next().ok_or_else(|| RouterError::InvalidPhaseTransition { id: id.clone(), phase })?;
        state.session.phase = next;
        state.session.time_budget_secs = next.budget_secs();
        state.session.phase_started_ms = self.clock.now_ms().max(state.last_ts);
        state.session.budget_exceeded = false;
        Ok(state.session.clone())
    }

    pub fn close_session(&self, id: &SessionId) -> Result<Session, RouterError> {
        let slot = self.slot(id)?;
        let mut state = slot.state.lock().expect("session lock");
        if state.session.status == SessionStatus::Closed {
            return Err(RouterError::SessionClosed(id.clone()));
        }
        state.session.status = SessionStatus::Closed;
        state.log = None;
        tracing::info!(session = %id, events = state.session.seq_counter, "session closed");
        Ok(state.session.clone())
    }

    /// All events so far, in seq order. Works on open and closed sessions.
    pub fn export_transcript(&self, id: &SessionId) -> Result<Vec<DialogueEvent>, RouterError> {
        let slot = self.slot(id)?;
        let events = slot.transcript.read().expect("transcript lock").clone();
        Ok(events)
    }

    /// Events after `since_seq` plus a live feed, with no gap or overlap
    /// between the two.
    pub fn subscribe(&self, id: &SessionId, since_seq: u64) -> Result<Subscription, RouterError> {
        let slot = self.slot(id)?;
        let _admission = slot.state.lock().expect("session lock");
        let live = slot.events.subscribe();
        let backlog = slot
            .transcript
            .read()
            .expect("transcript lock")
            .iter()
            .filter(|e| e.seq > since_seq)
            .cloned()
            .collect();
        Ok(Subscription { backlog, live })
    }
}
