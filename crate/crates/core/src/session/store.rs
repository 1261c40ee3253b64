use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Session, SessionError, TurnRecord};
use crate::agents::Conversation;
use crate::dfa::StateId;

pub const SCHEMA_VERSION: u32 = 1;

/// One line of a session log.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Created {
        schema_version: u32,
        id: String,
        created_at: DateTime<Utc>,
        conversation: Conversation,
    },
    Turn {
        schema_version: u32,
        turn: TurnRecord,
        conversation: Conversation,
    },
}

impl LogRecord {
    fn schema_version(&self) -> u32 {
        match self {
            LogRecord::Created { schema_version, .. } | LogRecord::Turn { schema_version, .. } => *schema_version,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub created_at: DateTime<Utc>,
    pub turns: usize,
    pub dfa_state: StateId,
    pub closed: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct IndexFile {
    schema_version: u32,
    sessions: BTreeMap<String, IndexEntry>,
}

/// Simulated storage faults for durability tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// The append fails before any byte is written.
    FailBeforeWrite,
    /// Half of the record reaches the disk, then the process "dies": the
    /// partial bytes are left in place.
    TornWrite,
}

/// Append-only per-session logs under `<data_dir>/sessions/` plus an
/// `index.json` snapshot replaced atomically.
#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    fault: Mutex<Option<Fault>>,
    index: Mutex<IndexFile>,
}

fn storage(context: &str, e: impl std::fmt::Display) -> SessionError {
    SessionError::Storage(format!("{context}: {e}"))
}

impl SessionStore {
    pub fn open(data_dir: &Path) -> Result<Self, SessionError> {
        let dir = data_dir.to_path_buf();
        fs::create_dir_all(dir.join("sessions")).map_err(|e| storage("create data dir", e))?;
        let index = match fs::read_to_string(dir.join("index.json")) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
            Err(_) => IndexFile::default(),
        };
        Ok(Self {
            dir,
            fault: Mutex::new(None),
            index: Mutex::new(index),
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.dir
    }

    /// Arms a one-shot fault for the next append.
    pub fn inject_fault(&self, fault: Fault) {
        *self.fault.lock().unwrap_or_else(|e| e.into_inner()) = Some(fault);
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join("sessions").join(format!("{id}.jsonl"))
    }

    pub fn exists(&self, id: &str) -> bool {
        valid_id(id) && self.log_path(id).exists()
    }

    pub fn session_ids(&self) -> Result<Vec<String>, SessionError> {
        let mut ids = Vec::new();
        let entries = fs::read_dir(self.dir.join("sessions")).map_err(|e| storage("list sessions", e))?;
        for entry in entries {
            let path = entry.map_err(|e| storage("list sessions", e))?.path();
            if path.extension().is_some_and(|x| x == "jsonl") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_owned());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn create(&self, session: &Session) -> Result<(), SessionError> {
        let record = LogRecord::Created {
            schema_version: SCHEMA_VERSION,
            id: session.id.clone(),
            created_at: session.created_at,
            conversation: session.conversation.clone(),
        };
        self.append(&session.id, &record, true)?;
        self.update_index(session)
    }

    pub fn append_turn(&self, session: &Session, turn: &TurnRecord) -> Result<(), SessionError> {
        let record = LogRecord::Turn {
            schema_version: SCHEMA_VERSION,
            turn: turn.clone(),
            conversation: session.conversation.clone(),
        };
        self.append(&session.id, &record, false)?;
        self.update_index(session)
    }

    fn append(&self, id: &str, record: &LogRecord, create: bool) -> Result<(), SessionError> {
        let mut line = serde_json::to_vec(record).map_err(|e| storage("encode", e))?;
        line.push(b'\n');
        let path = self.log_path(id);
        let mut file = OpenOptions::new()
            .create_new(create)
            .append(true)
            .open(&path)
            .map_err(|e| storage("open session log", e))?;
        let fault = self.fault.lock().unwrap_or_else(|e| e.into_inner()).take();
        match fault {
            Some(Fault::FailBeforeWrite) => return Err(storage("append", "injected failure")),
            Some(Fault::TornWrite) => {
                let _ = file.write_all(&line[..line.len() / 2]);
                let _ = file.sync_data();
                return Err(storage("append", "injected torn write"));
            }
            None => {}
        }
        let before = file.metadata().map_err(|e| storage("stat", e))?.len();
        if let Err(e) = file.write_all(&line).and_then(|_| file.sync_data()) {
            let _ = file.set_len(before);
            return Err(storage("append", e));
        }
        if create {
            if let Ok(dir) = File::open(self.dir.join("sessions")) {
                let _ = dir.sync_all();
            }
        }
        Ok(())
    }

    fn update_index(&self, session: &Session) -> Result<(), SessionError> {
        let mut index = self.index.lock().unwrap_or_else(|e| e.into_inner());
        index.schema_version = SCHEMA_VERSION;
        index.sessions.insert(
            session.id.clone(),
            IndexEntry {
                created_at: session.created_at,
                turns: session.turns.len(),
                dfa_state: session.conversation.dfa_state,
                closed: session.closed,
            },
        );
        let tmp = self.dir.join("index.json.tmp");
        let body = serde_json::to_vec_pretty(&*index).map_err(|e| storage("encode index", e))?;
        let write = || -> std::io::Result<()> {
            let mut f = File::create(&tmp)?;
            f.write_all(&body)?;
            f.sync_all()?;
            fs::rename(&tmp, self.dir.join("index.json"))
        };
        write().map_err(|e| storage("write index", e))
    }

    pub fn index(&self) -> BTreeMap<String, IndexEntry> {
        self.index.lock().unwrap_or_else(|e| e.into_inner()).sessions.clone()
    }

    /// Rebuilds a session from its log. A torn final line is cut off; any
    /// other malformed line is an error.
    pub fn load(&self, id: &str) -> Result<Option<Session>, SessionError> {
        if !valid_id(id) {
            return Ok(None);
        }
        let path = self.log_path(id);
        let file = match OpenOptions::new().read(true).write(true).open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(storage("open session log", e)),
        };
        let (session, good_len, torn) = parse_log(id, BufReader::new(&file))?;
        if torn {
            file.set_len(good_len).map_err(|e| storage("truncate torn tail", e))?;
            file.sync_all().map_err(|e| storage("truncate torn tail", e))?;
        }
        if let Some(s) = &session {
            self.update_index(s)?;
        }
        Ok(session)
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn parse_log<R: BufRead>(id: &str, mut reader: R) -> Result<(Option<Session>, u64, bool), SessionError> {
    let mut session: Option<Session> = None;
    let mut good_len = 0u64;
    let mut buf = Vec::new();
    let mut pending_error: Option<String> = None;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(|e| storage("read session log", e))?;
        if n == 0 {
            break;
        }
        if let Some(e) = pending_error.take() {
            return Err(SessionError::Storage(format!("session {id}: corrupt record: {e}")));
        }
        let complete = buf.ends_with(b"\n");
        let parsed = serde_json::from_slice::<LogRecord>(&buf);
        let record = match (parsed, complete) {
            (Ok(r), true) => r,
            (Ok(_), false) => {
                pending_error = Some("unterminated record".into());
                continue;
            }
            (Err(e), _) => {
                pending_error = Some(e.to_string());
                continue;
            }
        };
        if record.schema_version() != SCHEMA_VERSION {
            return Err(SessionError::Storage(format!(
                "session {id}: unsupported schema_version {}",
                record.schema_version()
            )));
        }
        match record {
            LogRecord::Created {
                id: rid,
                created_at,
                conversation,
                ..
            } => {
                if session.is_some() || rid != id {
                    return Err(SessionError::Storage(format!("session {id}: unexpected header")));
                }
                session = Some(Session {
                    id: rid,
                    created_at,
                    closed: conversation.is_closed(),
                    conversation,
                    turns: Vec::new(),
                });
            }
            LogRecord::Turn { turn, conversation, .. } => {
                let s = session
                    .as_mut()
                    .ok_or_else(|| SessionError::Storage(format!("session {id}: turn before header")))?;
                if turn.index != s.turns.len() {
                    return Err(SessionError::Storage(format!("session {id}: non-contiguous turn index {}", turn.index)));
                }
                s.closed = conversation.is_closed();
                s.conversation = conversation;
                s.turns.push(turn);
            }
        }
        good_len += n as u64;
    }
    let torn = pending_error.is_some();
    Ok((session, good_len, torn))
}

/// Reads a session log without repairing it.
pub fn read_log(path: &Path) -> Result<Option<Session>, SessionError> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| storage("read", "bad file name"))?
        .to_owned();
    let mut file = File::open(path).map_err(|e| storage("open session log", e))?;
    file.seek(SeekFrom::Start(0)).map_err(|e| storage("seek", e))?;
    Ok(parse_log(&id, BufReader::new(file))?.0)
}
