//! Uniform chat-completion interface over a live provider and deterministic
//! offline backends (scripted mock and cassette replay).

mod cassette;
mod live;
mod mock;
mod ratelimit;

use std::time::Duration;

use regex::RegexSet;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::LazyLock;
use thiserror::Error;

pub use cassette::{record_replay, CassetteMode, CassetteRecord, RecordingBackend, ReplayBackend, CASSETTE_SCHEMA_VERSION};
pub use live::{network_attempts, LiveBackend, LiveConfig, MAX_RETRIES};
pub use mock::{MockBackend, MockScript};
pub use ratelimit::{RateLimited, TokenBucket};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    #[serde(rename = "content")]
    pub text: String,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self { role: Role::System, text: text.into() }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self { role: Role::User, text: text.into() }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: Role::Assistant, text: text.into() }
    }
}

pub const DEFAULT_MODEL_ID: &str = "gpt4-0613";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub model_id: String,
    pub temperature: f64,
    pub max_reply_tokens: u32,
    #[serde(with = "duration_ms")]
    pub timeout: Duration,
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self {
            model_id: DEFAULT_MODEL_ID.to_owned(),
            temperature: 0.0,
            max_reply_tokens: 800,
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub refused: bool,
    #[serde(with = "duration_ms")]
    pub latency: Duration,
    pub backend_id: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider rejected the request: {0}")]
    ProviderRejection(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cassette not found: {0}")]
    CassetteMissing(String),
    #[error("cassette diverged at request {index}")]
    CassetteDiverged { index: usize },
    #[error("cassette i/o failure: {0}")]
    CassetteIo(String),
}

/// A chat-completion backend. Implementations are safe for concurrent calls.
pub trait ChatBackend: Send + Sync {
    fn id(&self) -> &str;

    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<CompletionResult, LlmError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<CompletionResult, LlmError> {
        (**self).complete(messages, params)
    }
}

/// Checks the request shape shared by every backend: non-empty, at most one
/// system message and only in first position, non-empty user/assistant text,
/// last message from the user.
pub fn validate_request(messages: &[ChatMessage], params: &CompletionParams) -> Result<(), LlmError> {
    let invalid = |m: &str| Err(LlmError::InvalidRequest(m.to_owned()));
    let Some(last) = messages.last() else {
        return invalid("no messages");
    };
    if last.role != Role::User {
        return invalid("the last message must come from the user");
    }
    for (i, m) in messages.iter().enumerate() {
        match m.role {
            Role::System if i != 0 => return invalid("system message must come first"),
            Role::User | Role::Assistant if m.text.trim().is_empty() => {
                return invalid("user and assistant messages must not be empty")
            }
            _ => {}
        }
    }
    if params.temperature.is_nan() || params.temperature < 0.0 {
        return invalid("temperature must be non-negative");
    }
    if params.max_reply_tokens == 0 {
        return invalid("max_reply_tokens must be positive");
    }
    Ok(())
}

pub const REFUSAL_PATTERNS_VERSION: u32 = 1;

static REFUSALS: LazyLock<RegexSet> = LazyLock::new(|| {
    RegexSet::new([
        r"(?i)\bi(?:'m| am) (?:sorry,? (?:but )?)?(?:unable|not able) to\b",
        r"(?i)\bi (?:can(?:'|no)t|cannot|won't|will not) (?:help|assist) with\b",
        r"(?i)\bi(?:'m| am) sorry,? (?:but )?i (?:can(?:'|no)t|cannot)\b",
        r"(?i)\bi (?:can(?:'|no)t|cannot) (?:provide|discuss|engage)\b",
        r"(?i)\bas an ai(?: language model)?,? i (?:can(?:'|no)t|cannot|am unable)\b",
        r"(?i)\bthis (?:request|content) (?:violates|goes against)\b",
    ])
    .expect("refusal patterns compile")
});

/// True when the text reads as a provider refusal.
pub fn detect_refusal(text: &str) -> bool {
    let folded = text.replace('\u{2019}', "'");
    REFUSALS.is_match(&folded)
}

/// Stable digest of a request, used for cassette matching.
pub fn request_hash(messages: &[ChatMessage], params: &CompletionParams) -> String {
    let canonical = serde_json::json!({
        "model": params.model_id,
        "temperature": params.temperature,
        "messages": messages,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

/// Stable digest of one user message after case and whitespace folding.
pub fn message_hash(text: &str) -> String {
    let folded = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    hex::encode(&Sha256::digest(folded.as_bytes())[..8])
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refusal_patterns() {
        assert!(detect_refusal("I'm unable to discuss that topic."));
        assert!(detect_refusal("I can't help with that request."));
        assert!(detect_refusal("I’m sorry, but I cannot talk about this."));
        assert!(!detect_refusal("Genital warts are caused by HPV."));
        assert!(!detect_refusal(""));
    }

    #[test]
    fn request_validation() {
        let p = CompletionParams::default();
        assert!(validate_request(&[], &p).is_err());
        assert!(validate_request(&[ChatMessage::system("s")], &p).is_err());
        assert!(validate_request(&[ChatMessage::system("s"), ChatMessage::user("hi")], &p).is_ok());
        assert!(validate_request(&[ChatMessage::user("hi"), ChatMessage::system("s"), ChatMessage::user("x")], &p).is_err());
        assert!(validate_request(&[ChatMessage::user("  ")], &p).is_err());
    }

    #[test]
    fn message_hash_folds_case_and_space() {
        assert_eq!(message_hash("What  now?"), message_hash("what now?"));
        assert_ne!(message_hash("what now?"), message_hash("what then?"));
    }
}
