use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::Deserialize;

use super::ratelimit::TokenBucket;
use super::{detect_refusal, validate_request, ChatBackend, ChatMessage, CompletionParams, CompletionResult, LlmError};

pub const MAX_RETRIES: u32 = 3;

static NETWORK_ATTEMPTS: AtomicU64 = AtomicU64::new(0);

/// Number of HTTP requests issued by live backends in this process.
pub fn network_attempts() -> u64 {
    NETWORK_ATTEMPTS.load(Ordering::SeqCst)
}

fn offline() -> bool {
    std::env::var("OTIZ_OFFLINE").is_ok_and(|v| v == "1")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiveConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub requests_per_sec: f64,
    pub burst: u32,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".to_owned(),
            api_key: None,
            max_retries: MAX_RETRIES,
            backoff_base: Duration::from_millis(250),
            requests_per_sec: 2.0,
            burst: 4,
        }
    }
}

impl LiveConfig {
    /// Defaults overridden by `OTIZ_LLM_ENDPOINT` and `OTIZ_LLM_API_KEY`.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Ok(v) = std::env::var("OTIZ_LLM_ENDPOINT") {
            cfg.endpoint = v;
        }
        cfg.api_key = std::env::var("OTIZ_LLM_API_KEY").ok().filter(|k| !k.is_empty());
        cfg
    }
}

#[derive(Deserialize)]
struct Reply {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Retry(LlmError),
    Fatal(LlmError),
}

/// Chat-completions client for an OpenAI-compatible HTTP endpoint.
#[derive(Debug)]
pub struct LiveBackend {
    config: LiveConfig,
    limiter: TokenBucket,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Self {
        let limiter = TokenBucket::new(config.burst.max(1), config.requests_per_sec.max(0.01));
        Self { config, limiter }
    }

    fn attempt(&self, body: &serde_json::Value, timeout: Duration, n: u32) -> Attempt {
        self.limiter.acquire();
        NETWORK_ATTEMPTS.fetch_add(1, Ordering::SeqCst);
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(&self.config.endpoint).header("content-type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("authorization", format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(LlmError::Timeout { attempts: n }),
            Err(e @ (ureq::Error::BadUri(_) | ureq::Error::Json(_))) => {
                return Attempt::Fatal(LlmError::InvalidRequest(e.to_string()))
            }
            Err(e) => {
                return Attempt::Retry(LlmError::Transport {
                    attempts: n,
                    message: e.to_string(),
                })
            }
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Attempt::Retry(LlmError::Transport {
                attempts: n,
                message: format!("HTTP {status}"),
            });
        }
        if status >= 400 {
            let detail = resp.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Fatal(LlmError::ProviderRejection(format!("HTTP {status}: {detail}")));
        }
        match resp.body_mut().read_json::<Reply>() {
            Ok(r) => match r.choices.into_iter().next().and_then(|c| c.message.content) {
                Some(text) => Attempt::Done(text),
                None => Attempt::Fatal(LlmError::ProviderRejection("response has no content".to_owned())),
            },
            Err(ureq::Error::Timeout(_)) => Attempt::Retry(LlmError::Timeout { attempts: n }),
            Err(e) => Attempt::Fatal(LlmError::ProviderRejection(format!("malformed response: {e}"))),
        }
    }
}

impl ChatBackend for LiveBackend {
    fn id(&self) -> &str {
        "live"
    }

    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<CompletionResult, LlmError> {
        validate_request(messages, params)?;
        if offline() {
            return Err(LlmError::Transport {
                attempts: 0,
                message: "network disabled by OTIZ_OFFLINE".to_owned(),
            });
        }
        let body = serde_json::json!({
            "model": params.model_id,
            "temperature": params.temperature,
            "max_tokens": params.max_reply_tokens,
            "messages": messages,
        });
        let started = Instant::now();
        let deadline = started + params.timeout * 4;
        let mut n = 0;
        loop {
            n += 1;
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.attempt(&body, params.timeout.min(remaining), n) {
                Attempt::Done(text) => {
                    return Ok(CompletionResult {
                        refused: detect_refusal(&text),
                        text,
                        latency: started.elapsed(),
                        backend_id: self.id().to_owned(),
                    })
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) => {
                    let backoff = self.config.backoff_base * 2u32.saturating_pow(n - 1);
                    if n > self.config.max_retries || Instant::now() + backoff >= deadline {
                        return Err(e);
                    }
                    std::thread::sleep(backoff);
                }
            }
        }
    }
}
