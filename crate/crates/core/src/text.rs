//! Small lexical helpers shared by the mock-mode analysers.

/// Lowercased word tokens. Apostrophes are kept inside words (curly quotes
/// are folded to ASCII) and hyphens join compound words.
pub fn tokens(text: &str) -> Vec<String> {
    let folded = text.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'");
    folded
        .split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '-' || c == '/'))
        .map(|t| t.trim_matches(|c| c == '\'' || c == '-' || c == '/'))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Splits text into clauses on sentence punctuation and on "but".
pub fn clauses(text: &str) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for chunk in text.split(['.', ',', ';', '!', '?', '\n', ':']) {
        let mut current = Vec::new();
        for tok in tokens(chunk) {
            if tok == "but" || tok == "though" || tok == "although" {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
            } else {
                current.push(tok);
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
    }
    out
}

/// A cue phrase compiled to word patterns; `itch*` matches `itchy`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phrase {
    words: Vec<(String, bool)>,
}

impl Phrase {
    pub fn new(cue: &str) -> Self {
        let words = cue
            .split_whitespace()
            .map(|w| {
                let w = w.to_lowercase();
                match w.strip_suffix('*') {
                    Some(stem) => (stem.to_owned(), true),
                    None => (w, false),
                }
            })
            .collect();
        Self { words }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn matches_at(&self, toks: &[String], at: usize) -> bool {
        if self.words.is_empty() || at + self.words.len() > toks.len() {
            return false;
        }
        self.words.iter().zip(&toks[at..]).all(|((w, prefix), t)| {
            if *prefix {
                t.starts_with(w.as_str())
            } else {
                t == w
            }
        })
    }

    /// Start indices of every occurrence.
    pub fn find_all(&self, toks: &[String]) -> Vec<usize> {
        (0..toks.len()).filter(|&i| self.matches_at(toks, i)).collect()
    }

    pub fn occurs_in(&self, toks: &[String]) -> bool {
        (0..toks.len()).any(|i| self.matches_at(toks, i))
    }
}

const NEGATORS: &[&str] = &[
    "no", "not", "never", "without", "don't", "dont", "doesn't", "doesnt", "didn't", "didnt",
    "haven't", "havent", "hasn't", "hasnt", "isn't", "isnt", "aren't", "arent", "wasn't",
    "wasnt", "nor", "none", "neither",
];

const NEGATION_WINDOW: usize = 3;

/// True when a negator occurs within a few words before `at`.
pub fn negated_before(toks: &[String], at: usize) -> bool {
    let lo = at.saturating_sub(NEGATION_WINDOW);
    toks[lo..at].iter().any(|t| NEGATORS.contains(&t.as_str()))
}

/// Counts occurrences of any phrase from the list, one per position.
pub fn count_phrases(toks: &[String], phrases: &[Phrase]) -> usize {
    (0..toks.len())
        .filter(|&i| phrases.iter().any(|p| p.matches_at(toks, i)))
        .count()
}

pub fn phrases(cues: &[&str]) -> Vec<Phrase> {
    cues.iter().map(|c| Phrase::new(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_with_apostrophes() {
        assert_eq!(tokens("It doesn’t HURT, ok?"), vec!["it", "doesn't", "hurt", "ok"]);
        assert_eq!(tokens("fluid-filled"), vec!["fluid-filled"]);
    }

    #[test]
    fn clauses_split_on_but() {
        let c = clauses("It itches but no discharge. Fine");
        assert_eq!(c.len(), 3);
        assert_eq!(c[1], vec!["no", "discharge"]);
    }

    #[test]
    fn prefix_phrases() {
        let p = Phrase::new("itch*");
        assert!(p.occurs_in(&tokens("very itchy skin")));
        assert!(!p.occurs_in(&tokens("a witch")));
        let p = Phrase::new("burning when i pee");
        assert_eq!(p.find_all(&tokens("Burning when I pee, and burning when I pee")), vec![0, 5]);
    }

    #[test]
    fn negation_window() {
        let t = tokens("I do not have any discharge");
        assert!(negated_before(&t, 5));
        let t = tokens("no problems at all here and discharge");
        assert!(!negated_before(&t, 6));
    }
}
