use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{request_hash, validate_request, ChatBackend, ChatMessage, CompletionParams, CompletionResult, LlmError};

pub const CASSETTE_SCHEMA_VERSION: u32 = 1;

/// One recorded request/response pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteRecord {
    pub schema_version: u32,
    pub index: usize,
    pub request_hash: String,
    pub text: String,
    pub refused: bool,
    pub backend_id: String,
}

pub enum CassetteMode {
    Record(Arc<dyn ChatBackend>),
    Replay,
}

fn cassette_path(dir: &Path, session_id: &str) -> PathBuf {
    dir.join(format!("{session_id}.jsonl"))
}

/// Builds a recording or replaying backend for `<dir>/<session_id>.jsonl`.
pub fn record_replay(dir: &Path, session_id: &str, mode: CassetteMode) -> Result<Arc<dyn ChatBackend>, LlmError> {
    let path = cassette_path(dir, session_id);
    Ok(match mode {
        CassetteMode::Record(inner) => Arc::new(RecordingBackend::create(&path, inner)?),
        CassetteMode::Replay => Arc::new(ReplayBackend::open(&path)?),
    })
}

/// Forwards to an inner backend and appends every exchange to a cassette.
pub struct RecordingBackend {
    inner: Arc<dyn ChatBackend>,
    file: Mutex<(File, usize)>,
}

impl RecordingBackend {
    pub fn create(path: &Path, inner: Arc<dyn ChatBackend>) -> Result<Self, LlmError> {
        let io = |e: std::io::Error| LlmError::CassetteIo(format!("{}: {e}", path.display()));
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path).map_err(io)?;
        Ok(Self {
            inner,
            file: Mutex::new((file, 0)),
        })
    }
}

impl ChatBackend for RecordingBackend {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<CompletionResult, LlmError> {
        let result = self.inner.complete(messages, params)?;
        let mut guard = self.file.lock().unwrap_or_else(|e| e.into_inner());
        guard.1 += 1;
        let record = CassetteRecord {
            schema_version: CASSETTE_SCHEMA_VERSION,
            index: guard.1,
            request_hash: request_hash(messages, params),
            text: result.text.clone(),
            refused: result.refused,
            backend_id: result.backend_id.clone(),
        };
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        guard
            .0
            .write_all(line.as_bytes())
            .and_then(|_| guard.0.sync_data())
            .map_err(|e| LlmError::CassetteIo(e.to_string()))?;
        Ok(result)
    }
}

/// Serves recorded responses in order; any request that differs from the
/// recording fails with `CassetteDiverged`.
#[derive(Debug)]
pub struct ReplayBackend {
    records: Vec<CassetteRecord>,
    cursor: Mutex<usize>,
}

impl ReplayBackend {
    pub fn open(path: &Path) -> Result<Self, LlmError> {
        let file = File::open(path).map_err(|_| LlmError::CassetteMissing(path.display().to_string()))?;
        let mut records = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LlmError::CassetteIo(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CassetteRecord = serde_json::from_str(&line)
                .map_err(|e| LlmError::CassetteIo(format!("line {}: {e}", n + 1)))?;
            if rec.schema_version != CASSETTE_SCHEMA_VERSION {
                return Err(LlmError::CassetteIo(format!(
                    "line {}: unsupported schema_version {}",
                    n + 1,
                    rec.schema_version
                )));
            }
            records.push(rec);
        }
        Ok(Self::from_records(records))
    }

    pub fn from_records(records: Vec<CassetteRecord>) -> Self {
        Self {
            records,
            cursor: Mutex::new(0),
        }
    }

    pub fn remaining(&self) -> usize {
        self.records.len() - *self.cursor.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl ChatBackend for ReplayBackend {
    fn id(&self) -> &str {
        "replay"
    }

    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<CompletionResult, LlmError> {
        validate_request(messages, params)?;
        let mut cursor = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
        let index = *cursor + 1;
        let rec = self.records.get(*cursor).ok_or(LlmError::CassetteDiverged { index })?;
        if rec.request_hash != request_hash(messages, params) {
            return Err(LlmError::CassetteDiverged { index });
        }
        *cursor += 1;
        Ok(CompletionResult {
            text: rec.text.clone(),
            refused: rec.refused,
            latency: Duration::ZERO,
            backend_id: rec.backend_id.clone(),
        })
    }
}
