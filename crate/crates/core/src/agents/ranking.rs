//! Differential ranking and follow-up question selection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::kb::{score_condition, EvidenceSet, FollowUpQuestion, KnowledgeBase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Differential {
    pub condition_id: String,
    pub score: f64,
    pub rank: u32,
}

/// Ranks every condition: score descending, ties by condition id.
pub fn rank_differentials(evidence: &EvidenceSet, kb: &KnowledgeBase) -> Vec<Differential> {
    let mut scored: Vec<(String, f64)> = kb
        .conditions()
        .iter()
        .map(|c| (c.id.clone(), score_condition(c, evidence)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
        .into_iter()
        .zip(1..)
        .map(|((condition_id, score), rank)| Differential {
            condition_id,
            score,
            rank,
        })
        .collect()
}

/// Score gap between the first and second ranked conditions.
pub fn lead(differentials: &[Differential]) -> f64 {
    match differentials {
        [first, second, ..] => first.score - second.score,
        [_] => f64::INFINITY,
        [] => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuestioningPolicy {
    /// Stop once the leader is ahead by at least this many score units.
    pub separation: f64,
    pub max_questions: usize,
}

impl Default for QuestioningPolicy {
    fn default() -> Self {
        Self {
            separation: 3.0,
            max_questions: 5,
        }
    }
}

/// Picks the unasked question that best separates the top two conditions,
/// or `None` when questioning should stop. Questions about features that are
/// already known are skipped.
pub fn next_question<'kb>(
    differentials: &[Differential],
    asked: &BTreeSet<String>,
    evidence: &EvidenceSet,
    kb: &'kb KnowledgeBase,
    policy: QuestioningPolicy,
) -> Option<&'kb FollowUpQuestion> {
    if asked.len() >= policy.max_questions || lead(differentials) >= policy.separation {
        return None;
    }
    let (first, second) = match differentials {
        [a, b, ..] => (kb.condition(&a.condition_id)?, kb.condition(&b.condition_id)?),
        _ => return None,
    };
    let mut best: Option<(&FollowUpQuestion, f64)> = None;
    for q in kb.questions() {
        if asked.contains(&q.id) || evidence.is_known(&q.resolves) {
            continue;
        }
        let gain = (first.weight(&q.resolves) - second.weight(&q.resolves)).abs();
        best = match best {
            Some((bq, bg)) if bg > gain || (bg == gain && bq.id < q.id) => Some((bq, bg)),
            _ => Some((q, gain)),
        };
    }
    best.map(|(q, _)| q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::FeatureState::*;

    #[test]
    fn all_unknown_is_alphabetical() {
        let kb = KnowledgeBase::bundled();
        let d = rank_differentials(&EvidenceSet::default(), &kb);
        let ids: Vec<_> = d.iter().map(|d| d.condition_id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        assert!(d.iter().all(|d| d.score == 0.0));
        assert_eq!(d.iter().map(|d| d.rank).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn warts_profile_ranks_first() {
        let kb = KnowledgeBase::bundled();
        let profile = kb.condition("anogenital_warts").unwrap().positive_profile();
        assert_eq!(rank_differentials(&profile, &kb)[0].condition_id, "anogenital_warts");
    }

    #[test]
    fn exhausted_bank_returns_none() {
        let kb = KnowledgeBase::bundled();
        let d = rank_differentials(&EvidenceSet::default(), &kb);
        let asked: BTreeSet<String> = kb.questions().map(|q| q.id.clone()).collect();
        let policy = QuestioningPolicy {
            max_questions: usize::MAX,
            ..Default::default()
        };
        assert!(next_question(&d, &asked, &EvidenceSet::default(), &kb, policy).is_none());
    }

    #[test]
    fn stops_at_max_questions_and_separation() {
        let kb = KnowledgeBase::bundled();
        let d = rank_differentials(&EvidenceSet::default(), &kb);
        let asked: BTreeSet<String> = ["q01", "q02", "q03", "q04", "q05"].map(String::from).into();
        assert!(next_question(&d, &asked, &EvidenceSet::default(), &kb, Default::default()).is_none());

        let ev = EvidenceSet::from([("urethral_discharge", Present), ("dysuria", Present)]);
        let d = rank_differentials(&ev, &kb);
        assert!(lead(&d) >= 3.0);
        assert!(next_question(&d, &BTreeSet::new(), &ev, &kb, Default::default()).is_none());
    }
}
