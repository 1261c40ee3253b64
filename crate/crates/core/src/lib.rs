//! Core engine for the Otiz counseling chatbot: the dialogue automaton, the
//! condition knowledge base, the counseling agents and their orchestrator,
//! layered prompt assembly, the language-model gateway, durable sessions and
//! the evaluation harness.

pub mod agents;
pub mod assets;
pub mod dfa;
pub mod eval;
pub mod kb;
pub mod llm;
pub mod prompt;
pub mod session;
pub mod text;

pub use agents::{Engine, EngineConfig, TurnResult};
pub use dfa::{DfaDefinition, EventKind, StateId};
pub use kb::{EvidenceSet, FeatureId, KnowledgeBase};
