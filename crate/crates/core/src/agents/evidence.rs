//! Mock-mode complaint analysis: cue tables from the KB ontology, with
//! clause-local negation.

use regex::Regex;
use std::sync::LazyLock;

use crate::kb::{EvidenceSet, FeatureSpec, FeatureState, KnowledgeBase};
use crate::text::{self, Phrase};

/// Extracts tri-state evidence from one utterance. Unrecognised text gives
/// an empty set. When several cues for one feature disagree, the last one
/// in the utterance wins.
pub fn extract_evidence(text: &str, kb: &KnowledgeBase) -> EvidenceSet {
    let clauses = text::clauses(text);
    let all_tokens: Vec<String> = clauses.iter().flatten().cloned().collect();
    let mut evidence = EvidenceSet::default();

    for spec in kb.ontology() {
        if !spec.context.is_empty() && !spec.context.iter().any(|w| all_tokens.contains(w)) {
            continue;
        }
        if let Some(state) = feature_state(spec, &clauses) {
            evidence.set(spec.id.clone(), state);
        }
        if let Some(threshold) = spec.age_threshold {
            if let Some(age) = stated_age(text) {
                let state = if age >= threshold {
                    FeatureState::Present
                } else {
                    FeatureState::Absent
                };
                evidence.set(spec.id.clone(), state);
            }
        }
    }
    evidence
}

fn feature_state(spec: &FeatureSpec, clauses: &[Vec<String>]) -> Option<FeatureState> {
    let present: Vec<Phrase> = spec.present.iter().map(|c| Phrase::new(c)).collect();
    let absent: Vec<Phrase> = spec.absent.iter().map(|c| Phrase::new(c)).collect();

    // (global position, state); later positions override earlier ones.
    let mut hits: Vec<(usize, usize, FeatureState)> = Vec::new();
    for (ci, clause) in clauses.iter().enumerate() {
        let mut claimed = vec![false; clause.len()];
        // Longer cues claim their tokens first so that "not painful" (a
        // present cue) is not also read as a negated absent cue.
        let mut cues: Vec<(&Phrase, FeatureState)> = present
            .iter()
            .map(|p| (p, FeatureState::Present))
            .chain(absent.iter().map(|p| (p, FeatureState::Absent)))
            .collect();
        cues.sort_by_key(|(p, _)| std::cmp::Reverse(p.len()));
        for (phrase, polarity) in cues {
            for at in phrase.find_all(clause) {
                if claimed[at..at + phrase.len()].iter().any(|c| *c) {
                    continue;
                }
                claimed[at..at + phrase.len()].iter_mut().for_each(|c| *c = true);
                let state = if text::negated_before(clause, at) {
                    flip(polarity)
                } else {
                    polarity
                };
                hits.push((ci, at, state));
            }
        }
    }
    hits.sort_by_key(|(ci, at, _)| (*ci, *at));
    hits.last().map(|(_, _, s)| *s)
}

fn flip(state: FeatureState) -> FeatureState {
    match state {
        FeatureState::Present => FeatureState::Absent,
        FeatureState::Absent => FeatureState::Present,
        FeatureState::Unknown => FeatureState::Unknown,
    }
}

static AGE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:i'?m|i am|aged?)\s+(\d{2})\b|\b(\d{2})\s*(?:years? old|yrs? old|y/?o)\b")
        .expect("age pattern compiles")
});

fn stated_age(text: &str) -> Option<u32> {
    let folded = text.replace('\u{2019}', "'");
    AGE.captures(&folded)
        .and_then(|c| c.get(1).or_else(|| c.get(2)))
        .and_then(|m| m.as_str().parse().ok())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YesNo {
    Yes,
    No,
}

const YES: &[&str] = &[
    "yes", "yeah", "yep", "yup", "y", "correct", "right", "definitely", "sure", "absolutely",
    "ok", "okay", "true", "indeed", "affirmative",
];
const NO: &[&str] = &["no", "nope", "nah", "n", "never", "negative", "not"];

/// Reads a yes/no answer from the first clause of a reply.
pub fn parse_yes_no(text: &str) -> Option<YesNo> {
    let clauses = text::clauses(text);
    let first = clauses.first()?;
    let head = first.iter().take(3).map(String::as_str).collect::<Vec<_>>();
    if head.starts_with(&["i", "think", "so"]) || head.starts_with(&["i", "do"]) {
        return Some(YesNo::Yes);
    }
    if head.starts_with(&["i", "don't"]) || head.starts_with(&["i", "haven't"]) || head.starts_with(&["i", "have", "not"]) {
        return Some(YesNo::No);
    }
    let w = head.first()?;
    if NO.contains(w) {
        Some(YesNo::No)
    } else if YES.contains(w) {
        Some(YesNo::Yes)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::FeatureId;
    use FeatureState::*;

    fn kb() -> KnowledgeBase {
        KnowledgeBase::bundled()
    }

    fn only(ev: &EvidenceSet) -> Vec<(String, FeatureState)> {
        ev.iter().map(|(k, v)| (k.0.clone(), v)).collect()
    }

    #[test]
    fn painless_sore() {
        let ev = extract_evidence("I have a painless sore on my penis", &kb());
        assert_eq!(only(&ev), vec![("lesion_painless".into(), Present)]);
    }

    #[test]
    fn empty_text() {
        assert!(extract_evidence("", &kb()).is_empty());
        assert!(extract_evidence("hello there", &kb()).is_empty());
    }

    #[test]
    fn burning_and_discharge() {
        let ev = extract_evidence("burning when I pee and discharge", &kb());
        assert_eq!(
            only(&ev),
            vec![("dysuria".into(), Present), ("urethral_discharge".into(), Present)]
        );
    }

    #[test]
    fn pain_cues_need_lesion_context() {
        let ev = extract_evidence("There is no pain from the sore", &kb());
        assert_eq!(ev.get(&FeatureId::from("lesion_painless")), Present);
        let ev = extract_evidence("no pain anywhere", &kb());
        assert_eq!(ev.get(&FeatureId::from("lesion_painless")), Unknown);
        let ev = extract_evidence("The blisters are painful", &kb());
        assert_eq!(ev.get(&FeatureId::from("lesion_painless")), Absent);
        assert_eq!(ev.get(&FeatureId::from("lesion_vesicular")), Present);
        let ev = extract_evidence("the sore is not painful", &kb());
        assert_eq!(ev.get(&FeatureId::from("lesion_painless")), Present);
    }

    #[test]
    fn negated_cues_mark_absent() {
        let ev = extract_evidence("It itches but there is no discharge", &kb());
        assert_eq!(ev.get(&FeatureId::from("itching")), Present);
        assert_eq!(ev.get(&FeatureId::from("urethral_discharge")), Absent);
    }

    #[test]
    fn ages() {
        let ev = extract_evidence("I'm 65 and worried", &kb());
        assert_eq!(ev.get(&FeatureId::from("age_over_50")), Present);
        let ev = extract_evidence("I am 23 years old", &kb());
        assert_eq!(ev.get(&FeatureId::from("age_over_50")), Absent);
    }

    #[test]
    fn yes_no() {
        assert_eq!(parse_yes_no("Yes, I think so."), Some(YesNo::Yes));
        assert_eq!(parse_yes_no("No, not really"), Some(YesNo::No));
        assert_eq!(parse_yes_no("I don't think so"), Some(YesNo::No));
        assert_eq!(parse_yes_no("maybe"), None);
        assert_eq!(parse_yes_no(""), None);
    }
}
