use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::agents::{Conversation, Engine, TurnError};
use crate::dfa::StateId;
use crate::kb::{Condition, YesMeans};

const YES: &[&str] = &["Yes", "Yes, I have", "Yeah, I think so"];
const NO: &[&str] = &["No", "No, not really", "Nope"];

/// Script the actor follows once a diagnosis has been delivered.
const AFTER_DIAGNOSIS: &[&str] = &[
    "What is the treatment for this?",
    "I'm really scared and anxious about this.",
    "Yes",
];
const ASD_ANSWERS: &[bool] = &[true, true, false, true, false];
const WRAP_UP: &[&str] = &[
    "Can you tell me more about the tests I need?",
    "Thank you, goodbye.",
];

const MAX_QUESTION_TURNS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTurn {
    pub user: String,
    pub reply: String,
    pub state_before: StateId,
    pub state_after: StateId,
    pub lead_condition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCase {
    pub prompt_id: String,
    pub condition_id: String,
    pub is_sti: bool,
    pub diagnosed: bool,
    pub top2: Vec<String>,
    pub hit: bool,
    pub questions_asked: usize,
    pub final_state: StateId,
    pub transcript: Vec<SimTurn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub cases: Vec<SimCase>,
    pub hits_by_condition: BTreeMap<String, usize>,
    pub sti_hit_rate: f64,
    pub non_sti_hit_rate: f64,
}

fn answers_yes(truth: &Condition, question: &crate::kb::FollowUpQuestion) -> bool {
    let has = truth.has_positive_feature(&question.resolves);
    match question.yes_means {
        YesMeans::Present => has,
        YesMeans::Absent => !has,
    }
}

struct Actor<'a> {
    engine: &'a Engine,
    conv: Conversation,
    transcript: Vec<SimTurn>,
}

impl Actor<'_> {
    fn say(&mut self, text: &str) -> Result<(), TurnError> {
        let (conv, result) = self.engine.handle_turn(&self.conv, text)?;
        self.conv = conv;
        self.transcript.push(SimTurn {
            user: text.to_owned(),
            reply: result.reply,
            state_before: result.state_before,
            state_after: result.state_after,
            lead_condition: self.conv.differentials.first().map(|d| d.condition_id.clone()),
        });
        Ok(())
    }
}

/// Drives every corpus prompt through the engine with a patient actor that
/// answers follow-up questions from the true condition's feature profile.
pub fn simulate(engine: &Engine, corpus: &Corpus, seed: u64) -> Result<SimulationReport, TurnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(corpus.prompts.len());
    for prompt in &corpus.prompts {
        let Some(truth) = engine.kb.condition(&prompt.condition_id) else {
            continue;
        };
        let mut actor = Actor {
            engine,
            conv: engine.new_conversation(),
            transcript: Vec::new(),
        };
        actor.say(&prompt.text)?;
        for _ in 0..MAX_QUESTION_TURNS {
            if actor.conv.dfa_state == StateId::DiagnosisDelivery {
                break;
            }
            let reply = match actor.conv.pending_question.as_deref().and_then(|q| engine.kb.question(q)) {
                Some(q) if answers_yes(truth, q) => *YES.choose(&mut rng).expect("non-empty"),
                Some(_) => *NO.choose(&mut rng).expect("non-empty"),
                None => prompt.text.as_str(),
            };
            actor.say(reply)?;
        }
        let diagnosed = actor.conv.dfa_state == StateId::DiagnosisDelivery;
        let top2: Vec<String> = actor
            .conv
            .differentials
            .iter()
            .take(2)
            .map(|d| d.condition_id.clone())
            .collect();
        let questions_asked = actor.conv.asked.len();

        if diagnosed {
            for text in AFTER_DIAGNOSIS {
                actor.say(text)?;
            }
            for &positive in ASD_ANSWERS {
                if actor.conv.dfa_state != StateId::AsdScreening {
                    break;
                }
                actor.say(if positive { "Yes" } else { "No" })?;
            }
            for text in WRAP_UP {
                if !actor.conv.is_closed() {
                    actor.say(text)?;
                }
            }
        }

        cases.push(SimCase {
            prompt_id: prompt.id.clone(),
            condition_id: truth.id.clone(),
            is_sti: truth.is_sti,
            hit: diagnosed && top2.contains(&truth.id),
            diagnosed,
            top2,
            questions_asked,
            final_state: actor.conv.dfa_state,
            transcript: actor.transcript,
        });
    }

    let mut hits_by_condition: BTreeMap<String, usize> = BTreeMap::new();
    for c in &cases {
        *hits_by_condition.entry(c.condition_id.clone()).or_default() += usize::from(c.hit);
    }
    let rate = |sti: bool| {
        let group: Vec<_> = cases.iter().filter(|c| c.is_sti == sti).collect();
        if group.is_empty() {
            0.0
        } else {
            group.iter().filter(|c| c.hit).count() as f64 / group.len() as f64
        }
    };
    Ok(SimulationReport {
        seed,
        sti_hit_rate: rate(true),
        non_sti_hit_rate: rate(false),
        hits_by_condition,
        cases,
    })
}
