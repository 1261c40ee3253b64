//! Knowledge base of the six bundled genital conditions.
//!
//! The bundled file carries a weighted feature table per condition, the
//! follow-up question banks and patient-facing information text. Weights
//! are engineering fixtures; see the `notice` field of `data/kb.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const KB_SCHEMA_VERSION: u32 = 1;

/// Condition ids that must be flagged as sexually transmitted.
pub const STI_IDS: [&str; 4] = [
    "anogenital_warts",
    "anogenital_herpes",
    "primary_syphilis",
    "urethritis_cervicitis",
];
pub const NON_STI_IDS: [&str; 2] = ["penile_candidiasis", "penile_cancer"];

const MIN_FEATURES: usize = 5;
const MIN_QUESTIONS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KbError {
    #[error("malformed knowledge base: {0}")]
    Schema(String),
    #[error("knowledge base integrity error: {0}")]
    Integrity(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureId(pub String);

impl FeatureId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FeatureId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// One ontology entry together with the cue phrases used by the mock-mode
/// evidence extractor. A trailing `*` on a cue word matches any suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub id: FeatureId,
    pub label: String,
    /// When non-empty, cues only count if one of these words occurs.
    #[serde(default)]
    pub context: Vec<String>,
    #[serde(default)]
    pub present: Vec<String>,
    #[serde(default)]
    pub absent: Vec<String>,
    /// Numeric age statements at or above this value mark the feature present.
    #[serde(default)]
    pub age_threshold: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YesMeans {
    Present,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowUpQuestion {
    pub id: String,
    pub text: String,
    pub resolves: FeatureId,
    pub yes_means: YesMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedFeature {
    pub feature: FeatureId,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionInfo {
    pub overview: String,
    pub investigations: String,
    pub treatment: String,
    pub care_recommendation: String,
    #[serde(default)]
    pub resources: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub id: String,
    pub name: String,
    pub is_sti: bool,
    pub features: Vec<WeightedFeature>,
    pub questions: Vec<FollowUpQuestion>,
    pub info: ConditionInfo,
}

impl Condition {
    pub fn weight(&self, feature: &FeatureId) -> f64 {
        self.features
            .iter()
            .filter(|f| &f.feature == feature)
            .map(|f| f.weight)
            .sum()
    }

    /// Evidence with every positively weighted feature present.
    pub fn positive_profile(&self) -> EvidenceSet {
        let mut ev = EvidenceSet::default();
        for f in self.features.iter().filter(|f| f.weight > 0.0) {
            ev.set(f.feature.clone(), FeatureState::Present);
        }
        ev
    }

    pub fn has_positive_feature(&self, feature: &FeatureId) -> bool {
        self.weight(feature) > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureState {
    Present,
    Absent,
    #[default]
    Unknown,
}

/// Tri-state evidence; features not stored are unknown.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EvidenceSet(BTreeMap<FeatureId, FeatureState>);

impl EvidenceSet {
    pub fn get(&self, feature: &FeatureId) -> FeatureState {
        self.0.get(feature).copied().unwrap_or_default()
    }

    pub fn set(&mut self, feature: FeatureId, state: FeatureState) {
        if state == FeatureState::Unknown {
            self.0.remove(&feature);
        } else {
            self.0.insert(feature, state);
        }
    }

    pub fn is_known(&self, feature: &FeatureId) -> bool {
        self.get(feature) != FeatureState::Unknown
    }

    /// Later statements override earlier ones.
    pub fn merge(&mut self, newer: &EvidenceSet) {
        for (k, v) in &newer.0 {
            self.set(k.clone(), *v);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureId, FeatureState)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }
}

impl<const N: usize> From<[(&str, FeatureState); N]> for EvidenceSet {
    fn from(items: [(&str, FeatureState); N]) -> Self {
        let mut ev = EvidenceSet::default();
        for (k, v) in items {
            ev.set(FeatureId::from(k), v);
        }
        ev
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct KbFile {
    kb_version: u32,
    #[serde(default)]
    notice: String,
    ontology: Vec<FeatureSpec>,
    conditions: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    version: u32,
    notice: String,
    ontology: Vec<FeatureSpec>,
    conditions: Vec<Condition>,
}

/// Parses and checks a KB document.
pub fn load_kb(source: &str) -> Result<KnowledgeBase, KbError> {
    let file: KbFile = serde_json::from_str(source).map_err(|e| KbError::Schema(e.to_string()))?;
    if file.kb_version != KB_SCHEMA_VERSION {
        return Err(KbError::Schema(format!(
            "unsupported kb_version {} (expected {KB_SCHEMA_VERSION})",
            file.kb_version
        )));
    }
    let kb = KnowledgeBase {
        version: file.kb_version,
        notice: file.notice,
        ontology: file.ontology,
        conditions: file.conditions,
    };
    kb.check_integrity()?;
    Ok(kb)
}

impl KnowledgeBase {
    pub fn bundled() -> Self {
        load_kb(crate::assets::KB_JSON).expect("bundled KB loads")
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn notice(&self) -> &str {
        &self.notice
    }

    pub fn ontology(&self) -> &[FeatureSpec] {
        &self.ontology
    }

    pub fn feature_ids(&self) -> BTreeSet<&FeatureId> {
        self.ontology.iter().map(|f| &f.id).collect()
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn condition(&self, id: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.id == id)
    }

    pub fn questions(&self) -> impl Iterator<Item = &FollowUpQuestion> {
        self.conditions.iter().flat_map(|c| c.questions.iter())
    }

    pub fn question(&self, id: &str) -> Option<&FollowUpQuestion> {
        self.questions().find(|q| q.id == id)
    }

    fn check_integrity(&self) -> Result<(), KbError> {
        let integrity = |msg: String| Err(KbError::Integrity(msg));

        let mut features = BTreeSet::new();
        for f in &self.ontology {
            if !features.insert(&f.id) {
                return integrity(format!("duplicate feature id `{}`", f.id));
            }
        }

        let mut condition_ids = BTreeSet::new();
        let mut question_ids = BTreeSet::new();
        for c in &self.conditions {
            if !condition_ids.insert(c.id.as_str()) {
                return integrity(format!("duplicate condition id `{}`", c.id));
            }
            let mut own = BTreeSet::new();
            for wf in &c.features {
                if !features.contains(&wf.feature) {
                    return integrity(format!(
                        "condition `{}` references unknown feature `{}`",
                        c.id, wf.feature
                    ));
                }
                if !own.insert(&wf.feature) {
                    return integrity(format!(
                        "condition `{}` lists feature `{}` twice",
                        c.id, wf.feature
                    ));
                }
                if !wf.weight.is_finite() {
                    return integrity(format!("condition `{}` has a non-finite weight", c.id));
                }
            }
            for q in &c.questions {
                if !features.contains(&q.resolves) {
                    return integrity(format!(
                        "question `{}` resolves unknown feature `{}`",
                        q.id, q.resolves
                    ));
                }
                if !question_ids.insert(q.id.as_str()) {
                    return integrity(format!("duplicate question id `{}`", q.id));
                }
            }
            if c.features.len() < MIN_FEATURES {
                return integrity(format!(
                    "condition `{}` has {} features (minimum {MIN_FEATURES})",
                    c.id,
                    c.features.len()
                ));
            }
            if c.questions.len() < MIN_QUESTIONS {
                return integrity(format!(
                    "condition `{}` has {} questions (minimum {MIN_QUESTIONS})",
                    c.id,
                    c.questions.len()
                ));
            }
            if c.info.care_recommendation.trim().is_empty() {
                return integrity(format!("condition `{}` has no care recommendation", c.id));
            }
        }

        if self.conditions.len() != STI_IDS.len() + NON_STI_IDS.len() {
            return integrity(format!(
                "expected {} conditions, found {}",
                STI_IDS.len() + NON_STI_IDS.len(),
                self.conditions.len()
            ));
        }
        for (ids, expected) in [(&STI_IDS[..], true), (&NON_STI_IDS[..], false)] {
            for id in ids {
                match self.condition(id) {
                    None => return integrity(format!("missing condition `{id}`")),
                    Some(c) if c.is_sti != expected => {
                        return integrity(format!("condition `{id}` must have is_sti={expected}"))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }
}

/// Additive tri-state score: +w when present, -w when absent, 0 when unknown.
pub fn score_condition(condition: &Condition, evidence: &EvidenceSet) -> f64 {
    condition
        .features
        .iter()
        .map(|f| match evidence.get(&f.feature) {
            FeatureState::Present => f.weight,
            FeatureState::Absent => -f.weight,
            FeatureState::Unknown => 0.0,
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LintReport {
    pub problems: Vec<String>,
}

impl LintReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Checks beyond load-time integrity: every ontology feature is used, and
/// each condition is the unique top scorer under its own positive profile.
pub fn lint_kb(kb: &KnowledgeBase) -> LintReport {
    let mut problems = Vec::new();

    let used: BTreeSet<&FeatureId> = kb
        .conditions
        .iter()
        .flat_map(|c| {
            c.features
                .iter()
                .map(|f| &f.feature)
                .chain(c.questions.iter().map(|q| &q.resolves))
        })
        .collect();
    for f in &kb.ontology {
        if !used.contains(&f.id) {
            problems.push(format!("feature `{}` is not used by any condition or question", f.id));
        }
        if f.present.is_empty() && f.age_threshold.is_none() {
            problems.push(format!("feature `{}` has no extraction cues", f.id));
        }
    }

    for c in &kb.conditions {
        let profile = c.positive_profile();
        let own = score_condition(c, &profile);
        for other in kb.conditions.iter().filter(|o| o.id != c.id) {
            let theirs = score_condition(other, &profile);
            if theirs >= own {
                problems.push(format!(
                    "`{}` is not the unique top condition under its own profile (`{}` scores {theirs} vs {own})",
                    c.id, other.id
                ));
            }
        }
    }

    LintReport { problems }
}

#[cfg(test)]
mod tests {
    use super::*;
    use FeatureState::*;

    #[test]
    fn bundled_kb_shape() {
        let kb = KnowledgeBase::bundled();
        assert_eq!(kb.conditions().len(), 6);
        assert_eq!(kb.conditions().iter().filter(|c| c.is_sti).count(), 4);
        assert!(lint_kb(&kb).ok(), "{:?}", lint_kb(&kb));
    }

    #[test]
    fn ontology_equals_used_features() {
        let kb = KnowledgeBase::bundled();
        let mut used = BTreeSet::new();
        for c in kb.conditions() {
            for f in &c.features {
                used.insert(f.feature.0.clone());
            }
            for q in &c.questions {
                used.insert(q.resolves.0.clone());
            }
        }
        assert_eq!(kb.ontology().len(), used.len());
        assert_eq!(used.len(), 16);
    }

    #[test]
    fn dangling_question_feature_is_integrity_error() {
        let bad = crate::assets::KB_JSON.replacen("\"resolves\": \"dysuria\"", "\"resolves\": \"fever\"", 1);
        assert!(matches!(load_kb(&bad), Err(KbError::Integrity(m)) if m.contains("fever")));
    }

    #[test]
    fn duplicate_question_id_is_integrity_error() {
        let bad = crate::assets::KB_JSON.replacen("\"id\": \"q02\"", "\"id\": \"q01\"", 1);
        assert!(matches!(load_kb(&bad), Err(KbError::Integrity(_))));
    }

    #[test]
    fn malformed_is_schema_error() {
        assert!(matches!(load_kb("{"), Err(KbError::Schema(_))));
        assert!(matches!(load_kb("{\"kb_version\": 1}"), Err(KbError::Schema(_))));
    }

    #[test]
    fn unknown_evidence_scores_zero() {
        let kb = KnowledgeBase::bundled();
        for c in kb.conditions() {
            assert_eq!(score_condition(c, &EvidenceSet::default()), 0.0);
        }
    }

    #[test]
    fn painless_indurated_favours_syphilis() {
        let kb = KnowledgeBase::bundled();
        let ev = EvidenceSet::from([("lesion_painless", Present), ("indurated_ulcer", Present)]);
        let syph = score_condition(kb.condition("primary_syphilis").unwrap(), &ev);
        for c in kb.conditions().iter().filter(|c| c.id != "primary_syphilis") {
            assert!(score_condition(c, &ev) < syph, "{} >= syphilis", c.id);
        }
    }

    #[test]
    fn flipping_present_to_absent_moves_by_twice_weight() {
        let kb = KnowledgeBase::bundled();
        for c in kb.conditions() {
            for wf in &c.features {
                let present = EvidenceSet::from([(wf.feature.as_str(), Present)]);
                let absent = EvidenceSet::from([(wf.feature.as_str(), Absent)]);
                let diff = score_condition(c, &present) - score_condition(c, &absent);
                assert_eq!(diff, 2.0 * wf.weight);
            }
        }
    }
}
