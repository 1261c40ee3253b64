use std::collections::BTreeSet;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use super::{EvalError, EvaluationRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThemeKind {
    Strength,
    Weakness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theme {
    pub theme_id: String,
    pub kind: ThemeKind,
    pub label: String,
    pub patterns: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Codebook {
    pub themes: Vec<Theme>,
    compiled: Vec<Vec<Regex>>,
}

#[derive(Deserialize)]
struct CodebookFile {
    themes: Vec<Theme>,
}

impl Codebook {
    pub fn new(themes: Vec<Theme>) -> Result<Self, EvalError> {
        let compiled = themes
            .iter()
            .map(|t| {
                t.patterns
                    .iter()
                    .map(|p| {
                        RegexBuilder::new(p)
                            .case_insensitive(true)
                            .build()
                            .map_err(|e| EvalError::Validation(format!("theme {}: {e}", t.theme_id)))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { themes, compiled })
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let file: CodebookFile =
            serde_json::from_str(text).map_err(|e| EvalError::Validation(format!("codebook: {e}")))?;
        Self::new(file.themes)
    }

    pub fn bundled() -> Self {
        Self::from_json(crate::assets::CODEBOOK_JSON).expect("bundled codebook parses")
    }

    fn matches(&self, i: usize, text: &str) -> bool {
        self.compiled[i].iter().any(|r| r.is_match(text))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeCount {
    pub theme_id: String,
    pub kind: ThemeKind,
    pub label: String,
    pub count: usize,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeTally {
    pub evaluators: usize,
    pub counts: Vec<ThemeCount>,
}

/// Counts, per theme, the evaluators whose feedback mentions it at least
/// once. Percentages are over all distinct evaluators.
pub fn tally_themes(records: &[EvaluationRecord], codebook: &Codebook) -> ThemeTally {
    let evaluators: BTreeSet<&str> = records.iter().map(|r| r.evaluator_id.as_str()).collect();
    let counts = codebook
        .themes
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let who: BTreeSet<&str> = records
                .iter()
                .filter(|r| codebook.matches(i, &r.feedback))
                .map(|r| r.evaluator_id.as_str())
                .collect();
            let count = who.len();
            ThemeCount {
                theme_id: t.theme_id.clone(),
                kind: t.kind,
                label: t.label.clone(),
                count,
                percentage: if evaluators.is_empty() {
                    0.0
                } else {
                    100.0 * count as f64 / evaluators.len() as f64
                },
            }
        })
        .collect();
    ThemeTally {
        evaluators: evaluators.len(),
        counts,
    }
}
