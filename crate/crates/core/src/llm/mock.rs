use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use serde::Deserialize;

use super::{detect_refusal, message_hash, validate_request, ChatBackend, ChatMessage, CompletionParams, CompletionResult, LlmError, Role};
use crate::dfa::StateId;
use crate::prompt::parse_state_tag;

#[derive(Debug, Deserialize)]
struct ScriptFile {
    script_version: u32,
    fallback: String,
    defaults: BTreeMap<StateId, String>,
    #[serde(default)]
    entries: Vec<ScriptEntry>,
}

#[derive(Debug, Deserialize)]
struct ScriptEntry {
    state: StateId,
    message: String,
    reply: String,
}

/// Reply table keyed by (dialogue state, hash of the last user message),
/// with a default reply per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockScript {
    pub version: u32,
    fallback: String,
    defaults: BTreeMap<StateId, String>,
    entries: HashMap<(StateId, String), String>,
}

impl MockScript {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let file: ScriptFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let entries = file
            .entries
            .into_iter()
            .map(|e| ((e.state, message_hash(&e.message)), e.reply))
            .collect();
        Ok(Self {
            version: file.script_version,
            fallback: file.fallback,
            defaults: file.defaults,
            entries,
        })
    }

    pub fn bundled() -> Self {
        Self::from_json(crate::assets::MOCK_SCRIPT_JSON).expect("bundled mock script parses")
    }

    pub fn reply(&self, state: Option<StateId>, user_text: &str) -> &str {
        let Some(state) = state else {
            return &self.fallback;
        };
        self.entries
            .get(&(state, message_hash(user_text)))
            .or_else(|| self.defaults.get(&state))
            .unwrap_or(&self.fallback)
    }
}

/// Deterministic offline backend. Never touches the network.
#[derive(Debug, Clone)]
pub struct MockBackend {
    script: MockScript,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        Self { script }
    }

    pub fn bundled() -> Self {
        Self::new(MockScript::bundled())
    }
}

impl ChatBackend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<CompletionResult, LlmError> {
        validate_request(messages, params)?;
        let state = messages
            .first()
            .filter(|m| m.role == Role::System)
            .and_then(|m| parse_state_tag(&m.text));
        let user = &messages.last().expect("validated non-empty").text;
        let text = self.script.reply(state, user).to_owned();
        Ok(CompletionResult {
            refused: detect_refusal(&text),
            text,
            latency: Duration::ZERO,
            backend_id: self.id().to_owned(),
        })
    }
}
