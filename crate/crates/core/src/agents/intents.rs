//! Keyword intent detection for leaving a module or ending the chat.

use std::sync::LazyLock;

use crate::text::{self, Phrase};

static INFO_CUES: LazyLock<Vec<Phrase>> = LazyLock::new(|| {
    text::phrases(&[
        "more information", "more info", "tell me more", "information about", "explain",
        "treatment", "treat", "treated", "cure", "cured", "curable", "medicine", "medication",
        "antibiotic*", "cream", "test", "tests", "tested", "testing", "investigation*",
        "contagious", "spread", "infect my partner", "what now", "what should i do",
        "what do i do", "next steps", "go away", "how long",
    ])
});

static CLOSE_CUES: LazyLock<Vec<Phrase>> = LazyLock::new(|| {
    text::phrases(&[
        "goodbye", "bye", "good bye", "that's all", "that is all", "end the chat",
        "end this chat", "end the conversation", "end this conversation", "close the session",
        "no more questions", "/quit",
    ])
});

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfoTopic {
    Treatment,
    Investigations,
    Transmission,
    General,
}

pub fn is_medical_info_request(text: &str) -> bool {
    let toks = text::tokens(text);
    INFO_CUES.iter().any(|p| p.occurs_in(&toks))
}

pub fn is_close_request(text: &str) -> bool {
    if text.trim() == "/quit" {
        return true;
    }
    let toks = text::tokens(text);
    CLOSE_CUES.iter().any(|p| p.occurs_in(&toks))
}

pub fn info_topic(text: &str) -> InfoTopic {
    let toks = text::tokens(text);
    let any = |cues: &[&str]| text::phrases(cues).iter().any(|p| p.occurs_in(&toks));
    if any(&["treatment", "treat", "treated", "cure", "cured", "curable", "medicine", "medication", "antibiotic*", "cream"]) {
        InfoTopic::Treatment
    } else if any(&["test", "tests", "tested", "testing", "investigation*", "swab", "blood test"]) {
        InfoTopic::Investigations
    } else if any(&["contagious", "spread", "partner", "partners", "infect my partner"]) {
        InfoTopic::Transmission
    } else {
        InfoTopic::General
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn info_requests() {
        assert!(is_medical_info_request("I want more information about treatment"));
        assert!(is_medical_info_request("What tests do I need?"));
        assert!(!is_medical_info_request("I feel awful"));
        assert_eq!(info_topic("how is it treated?"), InfoTopic::Treatment);
        assert_eq!(info_topic("what tests do I need"), InfoTopic::Investigations);
        assert_eq!(info_topic("is it contagious"), InfoTopic::Transmission);
        assert_eq!(info_topic("tell me more"), InfoTopic::General);
    }

    #[test]
    fn close_requests() {
        assert!(is_close_request("Thank you, goodbye."));
        assert!(is_close_request("/quit"));
        assert!(!is_close_request("It is bothering me"));
    }
}
