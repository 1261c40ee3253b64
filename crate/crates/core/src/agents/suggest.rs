//! Question suggestion agent: three patient-voice prompts per turn.

use serde::{Deserialize, Serialize};

use crate::dfa::StateId;

pub const MAX_SUGGESTION_CHARS: usize = 120;
pub const SUGGESTION_COUNT: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub text: String,
    pub source_state: StateId,
}

fn state_bank(state: StateId) -> &'static [&'static str] {
    match state {
        StateId::Intake => &[
            "Can I describe a symptom that's worrying me?",
            "Is this conversation private?",
            "Can you help me work out what a rash or sore might be?",
        ],
        StateId::ComplaintAnalysis => &[
            "What could be causing this?",
            "Should I be worried about this?",
            "Do I need to see a doctor?",
        ],
        StateId::FollowUpQuestioning => &[
            "Why are you asking me that?",
            "Could this be an STI?",
            "Is {condition} one of the possibilities?",
            "Is this something serious?",
        ],
        StateId::DiagnosisDelivery => &[
            "How is {condition} treated?",
            "What tests do I need for {condition}?",
            "Can I pass {condition} on to my partner?",
            "Will {condition} go away on its own?",
        ],
        StateId::EmotionCheck => &[
            "Is it normal to feel this worried?",
            "Can you help me calm down?",
            "What is the treatment for {condition}?",
        ],
        StateId::AsdScreening => &[
            "Why are you asking me these questions?",
            "Is what I'm feeling normal?",
            "Can we talk about the treatment instead?",
        ],
        StateId::Psychotherapy => &[
            "Can you walk me through another exercise?",
            "How do I tell my partner about this?",
            "What is the treatment for {condition}?",
        ],
        StateId::Closing => &[
            "Can I start a new conversation later?",
            "Where can I get tested near me?",
        ],
    }
}

const GENERIC: &[&str] = &[
    "Can you explain that more simply?",
    "Where can I get tested?",
    "How can I protect my partner?",
    "What should I do next?",
    "Is this conversation private?",
    "How long does it take to get test results?",
    "Should I stop having sex for now?",
    "Can I still go to work or school?",
];

fn expand(template: &str, condition: Option<&str>) -> Option<String> {
    if template.contains("{condition}") {
        condition.map(|name| template.replace("{condition}", &name.to_lowercase()))
    } else {
        Some(template.to_owned())
    }
}

fn same(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

/// Draws from the state's bank (parameterised by the leading condition's
/// display name), then pads from the generic bank. Suggestions the user
/// already accepted are never offered again.
pub fn suggest_questions(
    state: StateId,
    top_condition: Option<&str>,
    accepted: &[String],
) -> Vec<Suggestion> {
    let mut out: Vec<Suggestion> = Vec::with_capacity(SUGGESTION_COUNT);
    let candidates = state_bank(state)
        .iter()
        .chain(GENERIC)
        .filter_map(|t| expand(t, top_condition))
        .chain((1..).map(|n| format!("Could you tell me one more thing I should know? ({n})")));
    for text in candidates {
        if out.len() == SUGGESTION_COUNT {
            break;
        }
        if text.chars().count() > MAX_SUGGESTION_CHARS
            || accepted.iter().any(|a| same(a, &text))
            || out.iter().any(|s| same(&s.text, &text))
        {
            continue;
        }
        out.push(Suggestion {
            text,
            source_state: state,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intake_defaults() {
        let s = suggest_questions(StateId::Intake, None, &[]);
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|s| state_bank(StateId::Intake).contains(&s.text.as_str())));
    }

    #[test]
    fn diagnosis_mentions_condition() {
        let s = suggest_questions(StateId::DiagnosisDelivery, Some("Anogenital herpes"), &[]);
        assert!(s.iter().any(|s| s.text.contains("treated") && s.text.contains("anogenital herpes")));
    }

    #[test]
    fn accepted_never_repeats_and_pads() {
        let mut accepted = Vec::new();
        for _ in 0..20 {
            let s = suggest_questions(StateId::Intake, None, &accepted);
            assert_eq!(s.len(), 3);
            for x in &s {
                assert!(!accepted.contains(&x.text));
                assert!(!x.text.is_empty() && x.text.chars().count() <= MAX_SUGGESTION_CHARS);
            }
            accepted.push(s[0].text.clone());
        }
    }
}
