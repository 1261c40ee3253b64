//! Durable chat sessions: per-session append-only logs, serialized turn
//! processing and a store integrity check.

mod store;

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use store::{read_log, Fault, IndexEntry, LogRecord, SessionStore, SCHEMA_VERSION};

use crate::agents::{Conversation, Engine, Suggestion, TurnError, TurnResult};
use crate::dfa::{run_trace_from, DfaDefinition, EventKind, StateId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub index: usize,
    pub user_text: String,
    pub reply_text: String,
    pub suggestions: Vec<String>,
    pub events_fired: Vec<EventKind>,
    pub state_before: StateId,
    pub state_after: StateId,
    pub timestamp: DateTime<Utc>,
    pub backend_id: String,
    pub refused: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub created_at: DateTime<Utc>,
    #[serde(flatten)]
    pub conversation: Conversation,
    pub turns: Vec<TurnRecord>,
    pub closed: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("session not found: {0}")]
    NotFound(String),
    #[error("the session is closed")]
    SessionClosed,
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("storage failure: {0}")]
    Storage(String),
}

impl From<TurnError> for SessionError {
    fn from(e: TurnError) -> Self {
        match e {
            TurnError::SessionClosed => SessionError::SessionClosed,
            TurnError::EmptyMessage => SessionError::Validation(e.to_string()),
            TurnError::Dfa(d) => SessionError::Storage(format!("automaton rejected a transition: {d}")),
        }
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Starts at a fixed instant and advances one second per reading.
#[derive(Debug)]
pub struct StepClock {
    next: AtomicI64,
}

impl StepClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self {
            next: AtomicI64::new(start.timestamp()),
        }
    }
}

impl Default for StepClock {
    fn default() -> Self {
        Self::new(Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap())
    }
}

impl Clock for StepClock {
    fn now(&self) -> DateTime<Utc> {
        let secs = self.next.fetch_add(1, Ordering::SeqCst);
        Utc.timestamp_opt(secs, 0).single().expect("in range")
    }
}

pub trait IdGenerator: Send + Sync {
    fn next_id(&self) -> String;
}

#[derive(Debug, Default)]
pub struct RandomIds;

impl IdGenerator for RandomIds {
    fn next_id(&self) -> String {
        uuid::Uuid::new_v4().simple().to_string()
    }
}

/// `s000001`, `s000002`, ...
#[derive(Debug, Default)]
pub struct SequentialIds {
    counter: AtomicU64,
}

impl IdGenerator for SequentialIds {
    fn next_id(&self) -> String {
        format!("s{:06}", self.counter.fetch_add(1, Ordering::SeqCst) + 1)
    }
}

/// Owns live sessions. Turns on one session are serialized by that
/// session's lock; different sessions proceed in parallel.
pub struct SessionManager {
    engine: Engine,
    store: SessionStore,
    clock: Arc<dyn Clock>,
    ids: Arc<dyn IdGenerator>,
    live: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionManager {
    pub fn open(engine: Engine, data_dir: &Path) -> Result<Self, SessionError> {
        Self::with_sources(engine, data_dir, Arc::new(SystemClock), Arc::new(RandomIds))
    }

    pub fn with_sources(
        engine: Engine,
        data_dir: &Path,
        clock: Arc<dyn Clock>,
        ids: Arc<dyn IdGenerator>,
    ) -> Result<Self, SessionError> {
        Ok(Self {
            engine,
            store: SessionStore::open(data_dir)?,
            clock,
            ids,
            live: Mutex::new(HashMap::new()),
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    pub fn create_session(&self) -> Result<Session, SessionError> {
        let mut id = self.ids.next_id();
        while self.store.exists(&id) {
            id = self.ids.next_id();
        }
        let session = Session {
            id: id.clone(),
            created_at: self.clock.now(),
            conversation: self.engine.new_conversation(),
            turns: Vec::new(),
            closed: false,
        };
        self.store.create(&session)?;
        self.live_map().insert(id, Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    fn live_map(&self) -> std::sync::MutexGuard<'_, HashMap<String, Arc<Mutex<Session>>>> {
        self.live.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        let mut live = self.live_map();
        if let Some(h) = live.get(id) {
            return Ok(h.clone());
        }
        let session = self.store.load(id)?.ok_or_else(|| SessionError::NotFound(id.to_owned()))?;
        let h = Arc::new(Mutex::new(session));
        live.insert(id.to_owned(), h.clone());
        Ok(h)
    }

    /// Runs one turn and persists it. State in memory only changes after the
    /// record is durably on disk.
    pub fn post_message(&self, id: &str, text: &str) -> Result<TurnResult, SessionError> {
        let handle = self.handle(id)?;
        let mut session = handle.lock().unwrap_or_else(|e| e.into_inner());
        if session.closed {
            return Err(SessionError::SessionClosed);
        }
        let (conversation, result) = self.engine.handle_turn(&session.conversation, text)?;
        let record = TurnRecord {
            index: session.turns.len(),
            user_text: text.to_owned(),
            reply_text: result.reply.clone(),
            suggestions: result.suggestions.iter().map(|s| s.text.clone()).collect(),
            events_fired: result.events_fired.clone(),
            state_before: result.state_before,
            state_after: result.state_after,
            timestamp: self.clock.now(),
            backend_id: result.backend_id.clone(),
            refused: result.refused,
            backend_error: result.backend_error.clone(),
        };
        let mut next = Session {
            id: session.id.clone(),
            created_at: session.created_at,
            closed: conversation.is_closed(),
            conversation,
            turns: Vec::new(),
        };
        next.turns = std::mem::take(&mut session.turns);
        next.turns.push(record.clone());
        if let Err(e) = self.store.append_turn(&next, &record) {
            next.turns.pop();
            session.turns = next.turns;
            return Err(e);
        }
        *session = next;
        Ok(result)
    }

    pub fn get_session(&self, id: &str) -> Result<Session, SessionError> {
        let handle = self.handle(id)?;
        let s = handle.lock().unwrap_or_else(|e| e.into_inner()).clone();
        Ok(s)
    }

    pub fn get_transcript(&self, id: &str) -> Result<Vec<TurnRecord>, SessionError> {
        Ok(self.get_session(id)?.turns)
    }

    pub fn suggestions(&self, id: &str) -> Result<Vec<Suggestion>, SessionError> {
        Ok(self.get_session(id)?.conversation.suggestions)
    }
}

/// Checks contiguity, state chaining, automaton replay and the closed flag.
pub fn verify_session(session: &Session, dfa: &DfaDefinition) -> Vec<String> {
    let mut problems = Vec::new();
    let mut state = dfa.start();
    for (i, t) in session.turns.iter().enumerate() {
        if t.index != i {
            problems.push(format!("turn {i}: index {}", t.index));
        }
        if t.state_before != state {
            problems.push(format!("turn {i}: state_before {} but previous state {state}", t.state_before));
        }
        match run_trace_from(dfa, t.state_before, &t.events_fired) {
            Ok(trace) if trace.final_state() == t.state_after => {}
            Ok(trace) => problems.push(format!(
                "turn {i}: events replay to {} but state_after is {}",
                trace.final_state(),
                t.state_after
            )),
            Err(e) => problems.push(format!("turn {i}: {e}")),
        }
        state = t.state_after;
    }
    if session.conversation.dfa_state != state {
        problems.push(format!(
            "stored state {} differs from replayed state {state}",
            session.conversation.dfa_state
        ));
    }
    if session.closed != (state == StateId::Closing) {
        problems.push("closed flag disagrees with the automaton state".to_owned());
    }
    problems
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StoreReport {
    pub sessions: usize,
    pub turns: usize,
    pub problems: Vec<String>,
}

impl StoreReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Read-only integrity check over every session log in a data directory.
pub fn check_store(data_dir: &Path, dfa: &DfaDefinition) -> Result<StoreReport, SessionError> {
    let dir = data_dir.join("sessions");
    let mut report = StoreReport::default();
    let Ok(entries) = std::fs::read_dir(&dir) else {
        return Ok(report);
    };
    let mut paths: Vec<_> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    for path in paths {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        match read_log(&path) {
            Ok(Some(s)) => {
                report.sessions += 1;
                report.turns += s.turns.len();
                report
                    .problems
                    .extend(verify_session(&s, dfa).into_iter().map(|p| format!("{name}: {p}")));
            }
            Ok(None) => report.problems.push(format!("{name}: empty log")),
            Err(e) => report.problems.push(format!("{name}: {e}")),
        }
    }
    Ok(report)
}
