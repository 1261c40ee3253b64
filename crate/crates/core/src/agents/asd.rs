//! Five-item acute stress screen. The items and the three-positive threshold
//! are a non-clinical fixture modelled on the acute stress construct.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsdItem {
    Intrusion,
    Avoidance,
    Hyperarousal,
    NegativeMood,
    Dissociation,
}

impl AsdItem {
    pub const ORDER: [AsdItem; 5] = [
        AsdItem::Intrusion,
        AsdItem::Avoidance,
        AsdItem::Hyperarousal,
        AsdItem::NegativeMood,
        AsdItem::Dissociation,
    ];

    pub fn prompt(self) -> &'static str {
        match self {
            AsdItem::Intrusion => "Since you found out about this, have you had upsetting thoughts or images about it that keep coming back even when you try to push them away?",
            AsdItem::Avoidance => "Have you been avoiding thinking or talking about it, or avoiding people and places that remind you of it?",
            AsdItem::Hyperarousal => "Have you felt on edge or jumpy, or had trouble sleeping or concentrating?",
            AsdItem::NegativeMood => "Have you found it hard to feel any positive emotions, like happiness or satisfaction?",
            AsdItem::Dissociation => "Have you felt numb or detached, or as if things around you were not quite real?",
        }
    }
}

pub const ELEVATED_THRESHOLD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsdRisk {
    None,
    Elevated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsdAnswer {
    pub item_id: AsdItem,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AsdScreenState {
    pub answers: Vec<AsdAnswer>,
    pub complete: bool,
    pub risk: Option<AsdRisk>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("the stress screen is already complete")]
pub struct AlreadyComplete;

impl AsdScreenState {
    pub fn next_item(&self) -> Option<AsdItem> {
        AsdItem::ORDER.get(self.answers.len()).copied()
    }
}

pub fn asd_step(state: &AsdScreenState, positive: bool) -> Result<AsdScreenState, AlreadyComplete> {
    let item_id = match (state.complete, state.next_item()) {
        (false, Some(item)) => item,
        _ => return Err(AlreadyComplete),
    };
    let mut next = state.clone();
    next.answers.push(AsdAnswer { item_id, positive });
    if next.answers.len() == AsdItem::ORDER.len() {
        next.complete = true;
        let positives = next.answers.iter().filter(|a| a.positive).count();
        next.risk = Some(if positives >= ELEVATED_THRESHOLD {
            AsdRisk::Elevated
        } else {
            AsdRisk::None
        });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(answers: &[bool]) -> AsdScreenState {
        answers
            .iter()
            .fold(AsdScreenState::default(), |s, a| asd_step(&s, *a).unwrap())
    }

    #[test]
    fn all_positive_and_all_negative() {
        let s = run(&[true; 5]);
        assert!(s.complete);
        assert_eq!(s.risk, Some(AsdRisk::Elevated));
        let s = run(&[false; 5]);
        assert_eq!(s.risk, Some(AsdRisk::None));
    }

    #[test]
    fn three_of_five() {
        assert_eq!(run(&[true, true, true, false, false]).risk, Some(AsdRisk::Elevated));
    }

    #[test]
    fn exhaustive_threshold() {
        for mask in 0u32..32 {
            let answers: Vec<bool> = (0..5).map(|i| mask & (1 << i) != 0).collect();
            let s = run(&answers);
            let expected = if mask.count_ones() >= 3 { AsdRisk::Elevated } else { AsdRisk::None };
            assert_eq!(s.risk, Some(expected), "mask {mask:05b}");
            let order: Vec<_> = s.answers.iter().map(|a| a.item_id).collect();
            assert_eq!(order, AsdItem::ORDER);
        }
    }

    #[test]
    fn incomplete_has_no_risk() {
        let s = run(&[true, true, true, true]);
        assert!(!s.complete);
        assert_eq!(s.risk, None);
    }

    #[test]
    fn sixth_answer_errors() {
        assert_eq!(asd_step(&run(&[true; 5]), true), Err(AlreadyComplete));
    }
}
