//! Lexicon-based emotion recognition over a fixed six-label taxonomy.

use serde::{Deserialize, Serialize};
use std::sync::LazyLock;

use crate::text::{self, Phrase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionLabel {
    Anxiety,
    Fear,
    Shame,
    Sadness,
    Neutral,
    Relief,
}

impl EmotionLabel {
    pub fn is_distress(self) -> bool {
        matches!(
            self,
            EmotionLabel::Anxiety | EmotionLabel::Fear | EmotionLabel::Shame | EmotionLabel::Sadness
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Anxiety => "anxiety",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Shame => "shame",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Relief => "relief",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionEstimate {
    pub label: EmotionLabel,
    pub intensity: f64,
}

impl EmotionEstimate {
    pub const NEUTRAL: EmotionEstimate = EmotionEstimate {
        label: EmotionLabel::Neutral,
        intensity: 0.0,
    };

    pub fn is_distress(&self, threshold: f64) -> bool {
        self.label.is_distress() && self.intensity >= threshold
    }
}

impl Default for EmotionEstimate {
    fn default() -> Self {
        Self::NEUTRAL
    }
}

/// Matched-term density is scaled by this factor before clipping, so one
/// affect term in a short sentence registers as strong.
const DENSITY_SCALE: f64 = 4.0;

// Order doubles as the tie-break order.
static LEXICON: LazyLock<Vec<(EmotionLabel, Vec<Phrase>)>> = LazyLock::new(|| {
    vec![
        (
            EmotionLabel::Anxiety,
            text::phrases(&[
                "anxious", "anxiety", "worried", "worry*", "nervous", "panic*", "stress*",
                "can't sleep", "cannot sleep", "on edge", "freaking out", "overthinking",
            ]),
        ),
        (
            EmotionLabel::Fear,
            text::phrases(&["scared", "afraid", "terrified", "fear*", "frightened", "petrified"]),
        ),
        (
            EmotionLabel::Shame,
            text::phrases(&[
                "ashamed", "embarrass*", "shame*", "dirty", "guilty", "humiliated", "disgusting",
                "disgusted",
            ]),
        ),
        (
            EmotionLabel::Sadness,
            text::phrases(&[
                "sad", "depressed", "hopeless", "crying", "upset", "devastated", "miserable",
                "heartbroken", "lonely",
            ]),
        ),
        (
            EmotionLabel::Relief,
            text::phrases(&[
                "relief", "relieved", "thanks", "thank you", "glad", "reassured", "reassuring",
                "feel better", "feeling better", "calmer",
            ]),
        ),
    ]
});

pub fn assess_emotion(text: &str) -> EmotionEstimate {
    let toks = text::tokens(text);
    if toks.is_empty() {
        return EmotionEstimate::NEUTRAL;
    }
    let mut best: Option<(EmotionLabel, usize)> = None;
    let mut total = 0;
    for (label, phrases) in LEXICON.iter() {
        let n = text::count_phrases(&toks, phrases);
        total += n;
        if n > 0 && best.is_none_or(|(_, b)| n > b) {
            best = Some((*label, n));
        }
    }
    match best {
        None => EmotionEstimate::NEUTRAL,
        Some((label, _)) => EmotionEstimate {
            label,
            intensity: (DENSITY_SCALE * total as f64 / toks.len() as f64).clamp(0.0, 1.0),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scared_cannot_sleep() {
        let e = assess_emotion("I'm so scared I can't sleep");
        assert!(matches!(e.label, EmotionLabel::Anxiety | EmotionLabel::Fear));
        assert!(e.intensity > 0.0);
    }

    #[test]
    fn relief() {
        assert_eq!(assess_emotion("thanks, that's a relief").label, EmotionLabel::Relief);
    }

    #[test]
    fn empty_is_neutral() {
        assert_eq!(assess_emotion(""), EmotionEstimate::NEUTRAL);
        assert_eq!(assess_emotion("I have a sore").label, EmotionLabel::Neutral);
    }

    #[test]
    fn intensity_bounded() {
        let e = assess_emotion("scared scared scared");
        assert_eq!(e.intensity, 1.0);
        let long = "I noticed a small thing on my skin last week and I am a little worried about it overall";
        let e = assess_emotion(long);
        assert!(e.intensity < 0.4, "{e:?}");
    }
}
