//! The counseling agents and the orchestrator that routes each user turn
//! through the dialogue automaton.

pub mod asd;
pub mod compose;
pub mod emotion;
pub mod evidence;
pub mod intents;
pub mod intervention;
pub mod ranking;
pub mod suggest;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use asd::{asd_step, AsdItem, AsdRisk, AsdScreenState};
pub use compose::{compose_diagnosis, compose_info};
pub use emotion::{assess_emotion, EmotionEstimate, EmotionLabel};
pub use evidence::{extract_evidence, parse_yes_no, YesNo};
pub use intents::{info_topic, is_close_request, is_medical_info_request, InfoTopic};
pub use intervention::{select_intervention, InterventionKind, InterventionScript};
pub use ranking::{lead, next_question, rank_differentials, Differential, QuestioningPolicy};
pub use suggest::{suggest_questions, Suggestion};

use crate::dfa::{step, DfaDefinition, DfaError, EventKind, StateId};
use crate::kb::{Condition, EvidenceSet, FeatureState, KnowledgeBase, YesMeans};
use crate::llm::{ChatBackend, ChatMessage, CompletionParams};
use crate::prompt::{assess_tone, PromptLibrary, ToneScore};

/// Per-conversation agent state. Agents are stateless; everything they
/// remember between turns lives here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub dfa_state: StateId,
    pub tone: ToneScore,
    pub emotion: EmotionEstimate,
    pub evidence: EvidenceSet,
    pub differentials: Vec<Differential>,
    pub asd: Option<AsdScreenState>,
    pub asked: BTreeSet<String>,
    pub pending_question: Option<String>,
    pub diagnosis_delivered: bool,
    pub last_intervention: Option<InterventionKind>,
    pub suggestions: Vec<Suggestion>,
    pub accepted_suggestions: Vec<String>,
}

impl Conversation {
    pub fn new(kb: &KnowledgeBase, dfa: &DfaDefinition) -> Self {
        let evidence = EvidenceSet::default();
        Self {
            dfa_state: dfa.start(),
            tone: ToneScore::default(),
            emotion: EmotionEstimate::NEUTRAL,
            differentials: rank_differentials(&evidence, kb),
            evidence,
            asd: None,
            asked: BTreeSet::new(),
            pending_question: None,
            diagnosis_delivered: false,
            last_intervention: None,
            suggestions: suggest_questions(dfa.start(), None, &[]),
            accepted_suggestions: Vec::new(),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.dfa_state == StateId::Closing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResult {
    pub reply: String,
    pub suggestions: Vec<Suggestion>,
    pub state_before: StateId,
    pub state_after: StateId,
    pub events_fired: Vec<EventKind>,
    pub backend_id: String,
    pub refused: bool,
    /// Set when the backend failed and the templated draft was sent instead.
    pub backend_error: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TurnError {
    #[error("the session is closed")]
    SessionClosed,
    #[error("message text must not be empty")]
    EmptyMessage,
    #[error(transparent)]
    Dfa(#[from] DfaError),
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub policy: QuestioningPolicy,
    pub distress_threshold: f64,
    pub completion: CompletionParams,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            policy: QuestioningPolicy::default(),
            distress_threshold: 0.4,
            completion: CompletionParams::default(),
        }
    }
}

/// Shared, immutable orchestration context: automaton, knowledge base,
/// prompt library and language-model backend.
#[derive(Clone)]
pub struct Engine {
    pub dfa: Arc<DfaDefinition>,
    pub kb: Arc<KnowledgeBase>,
    pub prompts: Arc<PromptLibrary>,
    pub backend: Arc<dyn ChatBackend>,
    pub config: EngineConfig,
}

struct Turn<'a> {
    engine: &'a Engine,
    conv: Conversation,
    text: &'a str,
    events: Vec<EventKind>,
    extracted: EvidenceSet,
    info: bool,
}

impl Turn<'_> {
    fn fire(&mut self, event: EventKind) -> Result<(), TurnError> {
        self.conv.dfa_state = step(&self.engine.dfa, self.conv.dfa_state, event)?;
        self.events.push(event);
        Ok(())
    }

    fn kb(&self) -> &KnowledgeBase {
        &self.engine.kb
    }

    fn leader(&self) -> Option<&Condition> {
        let first = self.conv.differentials.first()?;
        self.engine.kb.condition(&first.condition_id)
    }

    fn distressed(&self) -> bool {
        self.conv.emotion.is_distress(self.engine.config.distress_threshold)
    }

    fn info_answer(&self) -> String {
        match self.leader() {
            Some(c) => compose_info(c, info_topic(self.text)),
            None => "I can help best once you describe your symptoms. Please also arrange a professional medical evaluation.".to_owned(),
        }
    }

    fn recap(&self, lead_in: &str) -> String {
        match self.leader() {
            Some(c) => format!("{lead_in}\n\n{}", compose_info(c, InfoTopic::General)),
            None => lead_in.to_owned(),
        }
    }

    fn complaint(&mut self) -> Result<String, TurnError> {
        let mut answered = false;
        if let Some(qid) = self.conv.pending_question.take() {
            let question = self.kb().question(&qid).cloned();
            match (question, parse_yes_no(self.text)) {
                (Some(q), Some(answer)) => {
                    let present = matches!(
                        (answer, q.yes_means),
                        (YesNo::Yes, YesMeans::Present) | (YesNo::No, YesMeans::Absent)
                    );
                    let state = if present { FeatureState::Present } else { FeatureState::Absent };
                    self.conv.evidence.set(q.resolves.clone(), state);
                    answered = true;
                }
                (Some(q), None) if self.extracted.is_empty() && !self.info => {
                    self.conv.pending_question = Some(q.id.clone());
                    return Ok(format!("Sorry, I didn't quite catch that. {}", q.text));
                }
                _ => {}
            }
        }
        self.conv.evidence.merge(&self.extracted);
        self.conv.differentials = rank_differentials(&self.conv.evidence, self.kb());

        if self.conv.evidence.is_empty() {
            return Ok("Could you describe what you have noticed? For example, any sores, bumps, discharge, itching or pain, where they are and how long you have had them.".to_owned());
        }
        if self.info && self.conv.diagnosis_delivered && !answered && self.extracted.is_empty() {
            return Ok(self.info_answer());
        }

        if self.conv.dfa_state == StateId::ComplaintAnalysis {
            self.fire(EventKind::DifferentialsReady)?;
        }
        let question = next_question(
            &self.conv.differentials,
            &self.conv.asked,
            &self.conv.evidence,
            self.kb(),
            self.engine.config.policy,
        )
        .cloned();
        match question {
            Some(q) => {
                self.conv.asked.insert(q.id.clone());
                self.conv.pending_question = Some(q.id.clone());
                Ok(format!("Thank you. To narrow this down: {}", q.text))
            }
            None => {
                self.fire(EventKind::DiagnosisReady)?;
                self.conv.diagnosis_delivered = true;
                Ok(compose_diagnosis(
                    &self.conv.differentials,
                    self.conv.tone,
                    self.engine.config.policy.separation,
                    self.kb(),
                ))
            }
        }
    }

    fn intervention(&mut self) -> String {
        let risk = self.conv.asd.as_ref().and_then(|a| a.risk);
        let mut chosen = select_intervention(&self.conv.emotion, risk);
        if self.conv.last_intervention == Some(chosen.kind) {
            let pos = InterventionKind::ALL.iter().position(|k| *k == chosen.kind).unwrap_or(0);
            chosen = intervention::script(InterventionKind::ALL[(pos + 1) % InterventionKind::ALL.len()]);
        }
        self.conv.last_intervention = Some(chosen.kind);
        chosen.render()
    }

    fn module_return(&mut self) -> Result<String, TurnError> {
        self.fire(EventKind::MedicalInfoRequest)?;
        self.conv.pending_question = None;
        Ok(self.info_answer())
    }

    fn run(&mut self) -> Result<String, TurnError> {
        if is_close_request(self.text) {
            self.fire(EventKind::CloseRequest)?;
            let care = self
                .leader()
                .filter(|_| self.conv.diagnosis_delivered)
                .map(|c| format!(" {}", c.info.care_recommendation))
                .unwrap_or_default();
            return Ok(format!("Thank you for talking with me. Take care of yourself.{care}"));
        }

        match self.conv.dfa_state {
            StateId::Intake => {
                self.fire(EventKind::UserMessage)?;
                self.complaint()
            }
            StateId::ComplaintAnalysis | StateId::FollowUpQuestioning => {
                self.fire(EventKind::UserMessage)?;
                self.complaint()
            }
            StateId::DiagnosisDelivery => {
                if self.info {
                    self.fire(EventKind::MedicalInfoRequest)?;
                    Ok(self.info_answer())
                } else if self.distressed() {
                    self.fire(EventKind::DistressDetected)?;
                    Ok("It sounds like this is weighing on you, and that is a very normal reaction. Would it help to answer a few short questions about how you have been feeling? Just say yes or no.".to_owned())
                } else {
                    self.fire(EventKind::CalmDetected)?;
                    Ok(self.recap("Is there anything else you would like to know?"))
                }
            }
            StateId::EmotionCheck => {
                let agreed = parse_yes_no(self.text) == Some(YesNo::Yes);
                if self.info {
                    self.module_return()
                } else if self.distressed() || agreed {
                    self.fire(EventKind::DistressDetected)?;
                    let screen = AsdScreenState::default();
                    let first = screen.next_item().expect("fresh screen has items");
                    self.conv.asd = Some(screen);
                    Ok(format!(
                        "Thank you. Please answer each question with yes or no.\n\n{}",
                        first.prompt()
                    ))
                } else {
                    self.fire(EventKind::CalmDetected)?;
                    Ok(self.recap("I'm glad you're feeling steadier. Let's come back to your health."))
                }
            }
            StateId::AsdScreening => {
                if self.info {
                    return self.module_return();
                }
                let screen = self.conv.asd.clone().unwrap_or_default();
                let Some(item) = screen.next_item() else {
                    return Ok("Thank you for answering those questions.".to_owned());
                };
                let Some(answer) = parse_yes_no(self.text) else {
                    return Ok(format!("Please answer with yes or no. {}", item.prompt()));
                };
                let next = asd_step(&screen, answer == YesNo::Yes).unwrap_or(screen);
                let complete = next.complete;
                let risk = next.risk;
                let following = next.next_item();
                self.conv.asd = Some(next);
                if !complete {
                    return Ok(following.map(AsdItem::prompt).unwrap_or_default().to_owned());
                }
                let event = if risk == Some(AsdRisk::Elevated) {
                    EventKind::AsdPositive
                } else {
                    EventKind::AsdNegative
                };
                self.fire(event)?;
                let opening = if risk == Some(AsdRisk::Elevated) {
                    "Thank you. Your answers suggest you are under considerable stress right now, which is understandable. Speaking with a mental health professional could really help."
                } else {
                    "Thank you. Your answers do not suggest a severe stress reaction, but worry like this is still worth looking after."
                };
                Ok(format!("{opening}\n\n{}", self.intervention()))
            }
            StateId::Psychotherapy => {
                if self.info {
                    self.module_return()
                } else if self.distressed() {
                    self.fire(EventKind::DistressDetected)?;
                    Ok(format!("That's alright, we can keep going together.\n\n{}", self.intervention()))
                } else {
                    self.fire(EventKind::CalmDetected)?;
                    Ok(self.recap("I'm glad that helped."))
                }
            }
            StateId::Closing => Err(TurnError::SessionClosed),
        }
    }
}

fn differentials_line(differentials: &[Differential], kb: &KnowledgeBase) -> String {
    differentials
        .iter()
        .take(3)
        .filter_map(|d| kb.condition(&d.condition_id).map(|c| format!("{} ({:+.1})", c.name, d.score)))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Engine {
    pub fn new(backend: Arc<dyn ChatBackend>, config: EngineConfig) -> Self {
        Self {
            dfa: Arc::new(DfaDefinition::bundled()),
            kb: Arc::new(KnowledgeBase::bundled()),
            prompts: Arc::new(PromptLibrary::bundled()),
            backend,
            config,
        }
    }

    pub fn new_conversation(&self) -> Conversation {
        Conversation::new(&self.kb, &self.dfa)
    }

    /// Runs one user turn. The input conversation is untouched; the updated
    /// state is returned alongside the result so callers can persist both
    /// atomically.
    pub fn handle_turn(&self, conv: &Conversation, text: &str) -> Result<(Conversation, TurnResult), TurnError> {
        if conv.is_closed() {
            return Err(TurnError::SessionClosed);
        }
        if text.trim().is_empty() {
            return Err(TurnError::EmptyMessage);
        }
        let mut conv = conv.clone();
        let state_before = conv.dfa_state;
        if let Some(s) = conv.suggestions.iter().find(|s| s.text.trim().eq_ignore_ascii_case(text.trim())) {
            conv.accepted_suggestions.push(s.text.clone());
        }
        conv.tone = assess_tone(text);
        conv.emotion = assess_emotion(text);

        let mut turn = Turn {
            engine: self,
            extracted: extract_evidence(text, &self.kb),
            info: is_medical_info_request(text),
            conv,
            text,
            events: Vec::new(),
        };
        let draft = turn.run()?;
        let Turn { mut conv, events, .. } = turn;

        let top_name = conv
            .differentials
            .first()
            .filter(|_| !conv.evidence.is_empty())
            .and_then(|d| self.kb.condition(&d.condition_id))
            .map(|c| c.name.clone());
        let (outcome, suggestions) = std::thread::scope(|scope| {
            let suggestions =
                scope.spawn(|| suggest_questions(conv.dfa_state, top_name.as_deref(), &conv.accepted_suggestions));
            let outcome = self.render_reply(&conv, text, &draft);
            (outcome, suggestions.join().expect("suggestion worker"))
        });

        conv.suggestions = suggestions.clone();
        let result = TurnResult {
            reply: outcome.reply,
            suggestions,
            state_before,
            state_after: conv.dfa_state,
            events_fired: events,
            backend_id: self.backend.id().to_owned(),
            refused: outcome.refused,
            backend_error: outcome.error,
        };
        Ok((conv, result))
    }

    fn render_reply(&self, conv: &Conversation, user_text: &str, draft: &str) -> ReplyOutcome {
        let focus = conv
            .differentials
            .first()
            .filter(|_| !conv.evidence.is_empty())
            .and_then(|d| self.kb.condition(&d.condition_id))
            .map(|c| format!("{}: {}", c.name, c.info.overview))
            .unwrap_or_else(|| self.prompts.generic_focus().trim().to_owned());
        let context = BTreeMap::from([
            ("condition_focus".to_owned(), focus),
            ("agent_draft".to_owned(), draft.to_owned()),
            ("differentials".to_owned(), differentials_line(&conv.differentials, &self.kb)),
        ]);
        let fallback = |error: Option<String>, refused: bool| ReplyOutcome {
            reply: draft.to_owned(),
            refused,
            error,
        };
        let system = match self.prompts.assemble_for(conv.dfa_state, conv.tone, &context) {
            Ok(p) => p.text,
            Err(e) => return fallback(Some(e.to_string()), false),
        };
        let messages = [ChatMessage::system(system), ChatMessage::user(user_text)];
        match self.backend.complete(&messages, &self.config.completion) {
            Ok(r) if r.refused => fallback(None, true),
            Ok(r) if r.text.contains(draft) => ReplyOutcome {
                reply: r.text,
                refused: false,
                error: None,
            },
            Ok(r) if r.text.trim().is_empty() => fallback(None, false),
            Ok(r) => ReplyOutcome {
                reply: format!("{}\n\n{}", r.text.trim(), draft),
                refused: false,
                error: None,
            },
            Err(e) => fallback(Some(e.to_string()), false),
        }
    }
}

struct ReplyOutcome {
    reply: String,
    refused: bool,
    error: Option<String>,
}
