use serde::{Deserialize, Serialize};

use super::asd::AsdRisk;
use super::emotion::{EmotionEstimate, EmotionLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionKind {
    GuidedBreathing,
    ProgressiveMuscleRelaxation,
    CognitiveRestructuring,
}

impl InterventionKind {
    pub const ALL: [InterventionKind; 3] = [
        InterventionKind::GuidedBreathing,
        InterventionKind::ProgressiveMuscleRelaxation,
        InterventionKind::CognitiveRestructuring,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InterventionScript {
    pub kind: InterventionKind,
    pub title: &'static str,
    pub steps: &'static [&'static str],
}

const BREATHING: &[&str] = &[
    "Sit comfortably and rest one hand on your stomach.",
    "Breathe in slowly through your nose for a count of four, feeling your stomach rise.",
    "Hold the breath gently for a count of four.",
    "Breathe out slowly through your mouth for a count of six.",
    "Repeat this for about two minutes, letting your shoulders drop a little more each time.",
];

const MUSCLE_RELAXATION: &[&str] = &[
    "Find a quiet place to sit or lie down.",
    "Clench your fists tightly for five seconds, then release and notice the difference.",
    "Tense your shoulders up towards your ears for five seconds, then let them drop.",
    "Work down through your legs and feet in the same way: tense, hold, release.",
    "Finish with three slow breaths and notice how your body feels now.",
];

const RESTRUCTURING: &[&str] = &[
    "Write down the thought that is troubling you most, for example 'everyone will judge me'.",
    "Ask yourself what evidence supports that thought and what evidence goes against it.",
    "Remember that sexual health conditions are common and treatable, and having one says nothing about your worth.",
    "Try rewriting the thought in a more balanced way, such as 'this is a health issue I am taking care of'.",
];

pub fn script(kind: InterventionKind) -> InterventionScript {
    match kind {
        InterventionKind::GuidedBreathing => InterventionScript {
            kind,
            title: "a short guided breathing exercise",
            steps: BREATHING,
        },
        InterventionKind::ProgressiveMuscleRelaxation => InterventionScript {
            kind,
            title: "a progressive muscle relaxation exercise",
            steps: MUSCLE_RELAXATION,
        },
        InterventionKind::CognitiveRestructuring => InterventionScript {
            kind,
            title: "a cognitive restructuring exercise",
            steps: RESTRUCTURING,
        },
    }
}

pub fn select_intervention(emotion: &EmotionEstimate, asd_risk: Option<AsdRisk>) -> InterventionScript {
    let kind = match (asd_risk, emotion.label) {
        (Some(AsdRisk::Elevated), _) => InterventionKind::GuidedBreathing,
        (_, EmotionLabel::Anxiety | EmotionLabel::Fear) => InterventionKind::GuidedBreathing,
        (_, EmotionLabel::Sadness | EmotionLabel::Shame) => InterventionKind::CognitiveRestructuring,
        _ => InterventionKind::ProgressiveMuscleRelaxation,
    };
    script(kind)
}

impl InterventionScript {
    pub fn render(&self) -> String {
        let mut out = format!("Let's try {}:\n", self.title);
        for (i, step) in self.steps.iter().enumerate() {
            out.push_str(&format!("{}. {}\n", i + 1, step));
        }
        out.trim_end().to_owned()
    }
}
