//! Patient-facing message drafts produced by the STI information agent.

use super::intents::InfoTopic;
use super::ranking::{lead, Differential};
use crate::kb::{Condition, KnowledgeBase};
use crate::prompt::{professionalism_for, ToneScore};

/// Register threshold: at or above this professionalism level the wording
/// is formal.
const FORMAL_FROM: u8 = 7;

fn top_conditions<'kb>(
    differentials: &[Differential],
    separation: f64,
    kb: &'kb KnowledgeBase,
) -> Vec<&'kb Condition> {
    let take = if lead(differentials) < separation { 2 } else { 1 };
    differentials
        .iter()
        .take(take)
        .filter_map(|d| kb.condition(&d.condition_id))
        .collect()
}

/// Diagnosis message: names the leading condition (and the runner-up when
/// the lead is below `separation`), the investigations to expect and the
/// condition's care recommendation.
pub fn compose_diagnosis(
    differentials: &[Differential],
    tone: ToneScore,
    separation: f64,
    kb: &KnowledgeBase,
) -> String {
    let formal = professionalism_for(tone).value() >= FORMAL_FROM;
    let named = top_conditions(differentials, separation, kb);
    let Some(first) = named.first() else {
        return "Based on what you have described, I recommend a professional medical evaluation with a doctor or sexual health clinic.".to_owned();
    };

    let mut msg = String::new();
    match (named.get(1), formal) {
        (None, true) => msg.push_str(&format!(
            "Based on what you have described, the most likely diagnosis is {}.",
            first.name
        )),
        (None, false) => msg.push_str(&format!(
            "From what you've told me, this looks most like {}.",
            first.name
        )),
        (Some(second), true) => msg.push_str(&format!(
            "Based on what you have described, the most likely diagnosis is {}, with {} as the main alternative to rule out.",
            first.name, second.name
        )),
        (Some(second), false) => msg.push_str(&format!(
            "From what you've told me, this looks most like {}, though {} is also possible.",
            first.name, second.name
        )),
    }
    msg.push(' ');
    msg.push_str(&first.info.overview);
    msg.push_str("\n\n");
    msg.push_str(&first.info.investigations);
    if let Some(second) = named.get(1) {
        msg.push(' ');
        msg.push_str(&second.info.investigations);
    }
    msg.push_str("\n\n");
    msg.push_str(&first.info.care_recommendation);
    msg
}

/// Answer to a medical information request about the leading condition.
pub fn compose_info(condition: &Condition, topic: InfoTopic) -> String {
    let body = match topic {
        InfoTopic::Treatment => condition.info.treatment.clone(),
        InfoTopic::Investigations => condition.info.investigations.clone(),
        InfoTopic::Transmission => format!(
            "{} Until you have been assessed, avoid sexual contact and let recent partners know so they can be checked too. {}",
            condition.info.overview, condition.info.resources
        ),
        InfoTopic::General => format!("{} {}", condition.info.overview, condition.info.treatment),
    };
    format!(
        "About {}: {}\n\n{}",
        condition.name, body, condition.info.care_recommendation
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ranking::rank_differentials;
    use crate::kb::{EvidenceSet, FeatureState::*};

    #[test]
    fn syphilis_with_large_gap() {
        let kb = KnowledgeBase::bundled();
        let ev = EvidenceSet::from([
            ("lesion_painless", Present),
            ("indurated_ulcer", Present),
            ("exposure_recent", Present),
        ]);
        let d = rank_differentials(&ev, &kb);
        assert!(lead(&d) >= 3.0);
        let msg = compose_diagnosis(&d, ToneScore::new(7), 3.0, &kb);
        assert!(msg.to_lowercase().contains("syphilis"));
        let care = &kb.condition("primary_syphilis").unwrap().info.care_recommendation;
        assert!(msg.contains(care.as_str()));
        let named = kb.conditions().iter().filter(|c| msg.contains(&c.name)).count();
        assert_eq!(named, 1);
    }

    #[test]
    fn small_gap_names_two() {
        let kb = KnowledgeBase::bundled();
        let ev = EvidenceSet::from([("lesion_painless", Present)]);
        let d = rank_differentials(&ev, &kb);
        assert!(lead(&d) < 3.0);
        let msg = compose_diagnosis(&d, ToneScore::new(3), 3.0, &kb);
        let named = kb.conditions().iter().filter(|c| msg.contains(&c.name)).count();
        assert_eq!(named, 2);
    }

    #[test]
    fn never_vague_or_empty() {
        let kb = KnowledgeBase::bundled();
        for c in kb.conditions() {
            for tone in 1..=10 {
                let d = rank_differentials(&c.positive_profile(), &kb);
                let msg = compose_diagnosis(&d, ToneScore::new(tone), 3.0, &kb);
                assert!(!msg.is_empty());
                assert!(!msg.to_lowercase().contains("cannot determine"));
            }
        }
    }
}
