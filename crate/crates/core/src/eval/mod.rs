//! Evaluation harness: prompt corpus, evaluator assignment, score
//! statistics, agreement, signed-rank testing, feedback themes and the
//! scripted patient-actor simulation.

mod assign;
mod report;
mod simulate;
mod stats;
mod themes;
mod wilcoxon;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assign::{build_assignment, verify_assignment, Assignment, AssignmentPlan};
pub use report::{stats_report, StatsReport};
pub use simulate::{simulate, SimCase, SimTurn, SimulationReport};
pub use stats::{agreement, render_cell, summarize, AgreementReport, SummaryCell};
pub use themes::{tally_themes, Codebook, Theme, ThemeCount, ThemeKind, ThemeTally};
pub use wilcoxon::{
    compare_sti_nonsti, p_greater, wilcoxon_signed_rank, wilcoxon_with, StiComparison, WilcoxonMethod,
    WilcoxonResult, ZeroMethod, EXACT_MAX_N,
};

use crate::kb::KnowledgeBase;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("no records to summarize")]
    EmptyInput,
    #[error("prompt {0} does not have exactly two evaluations")]
    UnpairedPrompt(String),
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid data: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    DiagnosticAccuracy,
    OverallAccuracy,
    Relevance,
    Correctness,
    Comprehensibility,
    Empathy,
}

impl Criterion {
    pub const ALL: [Criterion; 6] = [
        Criterion::DiagnosticAccuracy,
        Criterion::OverallAccuracy,
        Criterion::Relevance,
        Criterion::Correctness,
        Criterion::Comprehensibility,
        Criterion::Empathy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::DiagnosticAccuracy => "diagnostic_accuracy",
            Criterion::OverallAccuracy => "overall_accuracy",
            Criterion::Relevance => "relevance",
            Criterion::Correctness => "correctness",
            Criterion::Comprehensibility => "comprehensibility",
            Criterion::Empathy => "empathy",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Criterion::DiagnosticAccuracy => "Diagnostic Accuracy",
            Criterion::OverallAccuracy => "Overall Accuracy",
            Criterion::Relevance => "Relevance",
            Criterion::Correctness => "Correctness of Information",
            Criterion::Comprehensibility => "Comprehensibility",
            Criterion::Empathy => "Empathy",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| EvalError::Validation(format!("unknown criterion {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Complexity {
    Straightforward,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptCase {
    pub id: String,
    pub condition_id: String,
    pub complexity: Complexity,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub corpus_version: u32,
    pub prompts: Vec<PromptCase>,
}

pub const PROMPTS_PER_CONDITION: usize = 5;

impl Corpus {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Validation(format!("corpus: {e}")))
    }

    pub fn bundled() -> Self {
        Self::from_json(crate::assets::CORPUS_JSON).expect("bundled corpus parses")
    }

    pub fn prompt(&self, id: &str) -> Option<&PromptCase> {
        self.prompts.iter().find(|p| p.id == id)
    }

    pub fn prompt_ids(&self) -> Vec<String> {
        self.prompts.iter().map(|p| p.id.clone()).collect()
    }

    /// Prompt-to-condition lookup.
    pub fn conditions(&self) -> BTreeMap<&str, &str> {
        self.prompts
            .iter()
            .map(|p| (p.id.as_str(), p.condition_id.as_str()))
            .collect()
    }

    /// Shape problems: unique ids, known conditions, five prompts per
    /// condition covering both complexities, one or two lines each.
    pub fn check_shape(&self, kb: &KnowledgeBase) -> Vec<String> {
        let mut problems = Vec::new();
        let mut seen = BTreeSet::new();
        for p in &self.prompts {
            if !seen.insert(p.id.as_str()) {
                problems.push(format!("duplicate prompt id {}", p.id));
            }
            if kb.condition(&p.condition_id).is_none() {
                problems.push(format!("prompt {} names unknown condition {}", p.id, p.condition_id));
            }
            let lines = p.text.lines().filter(|l| !l.trim().is_empty()).count();
            if !(1..=2).contains(&lines) {
                problems.push(format!("prompt {} must be one or two lines", p.id));
            }
        }
        for c in kb.conditions() {
            let mine: Vec<_> = self.prompts.iter().filter(|p| p.condition_id == c.id).collect();
            if mine.len() != PROMPTS_PER_CONDITION {
                problems.push(format!(
                    "condition {} has {} prompts, expected {PROMPTS_PER_CONDITION}",
                    c.id,
                    mine.len()
                ));
            }
            let kinds: BTreeSet<_> = mine.iter().map(|p| p.complexity).collect();
            if !mine.is_empty() && kinds.len() < 2 {
                problems.push(format!("condition {} lacks a mix of straightforward and complex prompts", c.id));
            }
        }
        problems
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub prompt_id: String,
    pub evaluator_id: String,
    pub scores: BTreeMap<Criterion, i64>,
    #[serde(default)]
    pub feedback: String,
}

impl EvaluationRecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.prompt_id.trim().is_empty() || self.evaluator_id.trim().is_empty() {
            return Err(EvalError::Validation("prompt_id and evaluator_id are required".into()));
        }
        for c in Criterion::ALL {
            match self.scores.get(&c) {
                None => return Err(EvalError::Validation(format!("missing score for {}", c.as_str()))),
                Some(v) if !(0..=5).contains(v) => {
                    return Err(EvalError::Validation(format!(
                        "score for {} must be an integer from 0 to 5, got {v}",
                        c.as_str()
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn score(&self, criterion: Criterion) -> i64 {
        self.scores[&criterion]
    }
}

/// Parses and validates a line-delimited records file. Errors name the line.
pub fn parse_records(text: &str) -> Result<Vec<EvaluationRecord>, EvalError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: EvaluationRecord = serde_json::from_str(line)
            .map_err(|e| EvalError::Validation(format!("line {}: {e}", n + 1)))?;
        rec.validate()
            .map_err(|e| EvalError::Validation(format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Checks every record against the corpus and rejects duplicate
/// (prompt, evaluator) pairs.
pub fn check_records(records: &[EvaluationRecord], corpus: &Corpus) -> Result<(), EvalError> {
    let mut seen = BTreeSet::new();
    for r in records {
        r.validate()?;
        if corpus.prompt(&r.prompt_id).is_none() {
            return Err(EvalError::Validation(format!("unknown prompt {}", r.prompt_id)));
        }
        if !seen.insert((&r.prompt_id, &r.evaluator_id)) {
            return Err(EvalError::Validation(format!(
                "duplicate evaluation of {} by {}",
                r.prompt_id, r.evaluator_id
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_corpus_shape() {
        let kb = KnowledgeBase::bundled();
        let c = Corpus::bundled();
        assert_eq!(c.prompts.len(), 30);
        assert!(c.check_shape(&kb).is_empty(), "{:?}", c.check_shape(&kb));
    }

    #[test]
    fn short_condition_is_named() {
        let kb = KnowledgeBase::bundled();
        let mut c = Corpus::bundled();
        c.prompts.retain(|p| p.id != "P03");
        let problems = c.check_shape(&kb);
        assert!(problems.iter().any(|p| p.contains("anogenital_warts")));
    }

    #[test]
    fn record_validation() {
        let line = r#"{"prompt_id":"P01","evaluator_id":"E01","scores":{"diagnostic_accuracy":4,"overall_accuracy":4,"relevance":3,"correctness":5,"comprehensibility":4,"empathy":5},"feedback":""}"#;
        assert_eq!(parse_records(line).unwrap().len(), 1);
        assert!(parse_records(&line.replace("\"empathy\":5", "\"empathy\":6")).is_err());
        assert!(parse_records(&line.replace("\"empathy\":5", "\"empathy\":4.5")).is_err());
        assert!(parse_records(&line.replace(",\"empathy\":5", "")).is_err());
    }
}
