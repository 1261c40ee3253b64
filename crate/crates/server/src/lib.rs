//! HTTP front end over the session manager and the evaluation harness.

use std::fs::OpenOptions;
use std::future::Future;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use otiz_core::eval::{
    build_assignment, check_records, parse_records, stats_report, Codebook, Corpus, Criterion, EvalError, EvaluationRecord,
};
use otiz_core::session::{SessionError, SessionManager};

pub const RECORDS_FILE: &str = "records.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error_code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error_code: code.to_owned(),
                message: message.into(),
            },
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let msg = e.to_string();
        match e {
            SessionError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, "not_found", msg),
            SessionError::SessionClosed => Self::new(StatusCode::CONFLICT, "session_closed", msg),
            SessionError::Validation(_) => Self::validation(msg),
            SessionError::Storage(_) => Self::internal(msg),
        }
    }
}

impl From<EvalError> for ApiError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Infeasible(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "infeasible", e.to_string()),
            _ => Self::validation(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::validation(format!("malformed request body: {e}")))
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

/// Evaluation records submitted over HTTP, mirrored to a JSONL file.
#[derive(Debug)]
struct RecordStore {
    path: PathBuf,
    records: Mutex<Vec<EvaluationRecord>>,
}

impl RecordStore {
    fn open(dir: &Path) -> Result<Self, String> {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        let path = dir.join(RECORDS_FILE);
        let records = match std::fs::read_to_string(&path) {
            Ok(text) => parse_records(&text).map_err(|e| format!("{}: {e}", path.display()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(format!("{}: {e}", path.display())),
        };
        Ok(Self {
            path,
            records: Mutex::new(records),
        })
    }

    fn add(&self, record: EvaluationRecord, corpus: &Corpus) -> Result<usize, ApiError> {
        let mut records = self.records.lock().map_err(|_| ApiError::internal("record store poisoned"))?;
        let mut candidate = records.clone();
        candidate.push(record.clone());
        check_records(&candidate, corpus)?;
        let line = serde_json::to_string(&record).map_err(|e| ApiError::internal(e.to_string()))?;
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        writeln!(f, "{line}")
            .and_then(|()| f.sync_all())
            .map_err(|e| ApiError::internal(e.to_string()))?;
        records.push(record);
        Ok(records.len())
    }

    fn snapshot(&self) -> Vec<EvaluationRecord> {
        self.records.lock().map(|r| r.clone()).unwrap_or_default()
    }
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<SessionManager>,
    corpus: Arc<Corpus>,
    codebook: Arc<Codebook>,
    records: Arc<RecordStore>,
}

impl AppState {
    /// Evaluation records live under `<data_dir>/eval/`.
    pub fn new(sessions: SessionManager, corpus: Corpus, codebook: Codebook, data_dir: &Path) -> Result<Self, String> {
        Ok(Self {
            sessions: Arc::new(sessions),
            corpus: Arc::new(corpus),
            codebook: Arc::new(codebook),
            records: Arc::new(RecordStore::open(&data_dir.join("eval"))?),
        })
    }

    pub fn sessions(&self) -> &SessionManager {
        &self.sessions
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/messages", post(post_message))
        .route("/v1/sessions/{id}/transcript", get(transcript))
        .route("/v1/sessions/{id}/suggestions", get(suggestions))
        .route("/v1/eval/assignments", post(assignments))
        .route("/v1/eval/records", post(add_record))
        .route("/v1/eval/stats", get(stats))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then waits for in-flight requests.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

async fn health(State(st): State<AppState>) -> Json<serde_json::Value> {
    let engine = st.sessions.engine();
    Json(json!({
        "ok": true,
        "kb_version": engine.kb.version(),
        "dfa_version": engine.dfa.version(),
        "backend": engine.backend.id(),
    }))
}

async fn create_session(State(st): State<AppState>) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let s = blocking(move || Ok(st.sessions.create_session()?)).await?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "session_id": s.id, "dfa_state": s.conversation.dfa_state })),
    ))
}

async fn get_session(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<serde_json::Value> {
    blocking(move || {
        let s = st.sessions.get_session(&id)?;
        serde_json::to_value(s).map(Json).map_err(|e| ApiError::internal(e.to_string()))
    })
    .await
}

#[derive(Deserialize)]
struct MessageBody {
    text: String,
}

async fn post_message(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<serde_json::Value> {
    let msg: MessageBody = parse_body(&body)?;
    blocking(move || {
        let r = st.sessions.post_message(&id, &msg.text)?;
        serde_json::to_value(r).map(Json).map_err(|e| ApiError::internal(e.to_string()))
    })
    .await
}

async fn transcript(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<serde_json::Value> {
    blocking(move || {
        let t = st.sessions.get_transcript(&id)?;
        serde_json::to_value(t).map(Json).map_err(|e| ApiError::internal(e.to_string()))
    })
    .await
}

async fn suggestions(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<serde_json::Value> {
    blocking(move || {
        let s = st.sessions.suggestions(&id)?;
        serde_json::to_value(s).map(Json).map_err(|e| ApiError::internal(e.to_string()))
    })
    .await
}

#[derive(Deserialize)]
struct AssignmentBody {
    #[serde(default)]
    prompts: Option<Vec<String>>,
    evaluators: Vec<String>,
    per_prompt: usize,
    cap: usize,
    #[serde(default)]
    seed: u64,
}

async fn assignments(State(st): State<AppState>, body: Bytes) -> ApiResult<serde_json::Value> {
    let req: AssignmentBody = parse_body(&body)?;
    let prompts = req.prompts.unwrap_or_else(|| st.corpus.prompt_ids());
    let plan = build_assignment(&prompts, &req.evaluators, req.per_prompt, req.cap, req.seed)?;
    serde_json::to_value(plan).map(Json).map_err(|e| ApiError::internal(e.to_string()))
}

async fn add_record(State(st): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let record: EvaluationRecord = parse_body(&body)?;
    record.validate()?;
    let total = blocking(move || st.records.add(record, &st.corpus)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "accepted": true, "total": total }))))
}

#[derive(Deserialize)]
struct StatsQuery {
    /// Comma-separated criteria left out of the agreement count.
    #[serde(default)]
    exclude: Option<String>,
}

async fn stats(State(st): State<AppState>, Query(q): Query<StatsQuery>) -> ApiResult<serde_json::Value> {
    let exclude = q
        .exclude
        .iter()
        .flat_map(|s| s.split(','))
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<Criterion>())
        .collect::<Result<Vec<_>, _>>()?;
    blocking(move || {
        let records = st.records.snapshot();
        let report = stats_report(&records, &st.corpus, &st.sessions.engine().kb, &st.codebook, &exclude)?;
        serde_json::to_value(report).map(Json).map_err(|e| ApiError::internal(e.to_string()))
    })
    .await
}
