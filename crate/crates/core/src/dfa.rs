//! Deterministic finite automaton controlling conversational flow.
//!
//! Definitions are loaded from a JSON document (`dfa_version: 1`) and are
//! immutable afterwards. [`validate_dfa`] reports structural problems as data;
//! [`step`] and [`run_trace`] are pure functions over a definition.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DFA_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StateId {
    Intake,
    ComplaintAnalysis,
    FollowUpQuestioning,
    DiagnosisDelivery,
    EmotionCheck,
    AsdScreening,
    Psychotherapy,
    Closing,
}

impl StateId {
    pub const ALL: [StateId; 8] = [
        StateId::Intake,
        StateId::ComplaintAnalysis,
        StateId::FollowUpQuestioning,
        StateId::DiagnosisDelivery,
        StateId::EmotionCheck,
        StateId::AsdScreening,
        StateId::Psychotherapy,
        StateId::Closing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StateId::Intake => "INTAKE",
            StateId::ComplaintAnalysis => "COMPLAINT_ANALYSIS",
            StateId::FollowUpQuestioning => "FOLLOW_UP_QUESTIONING",
            StateId::DiagnosisDelivery => "DIAGNOSIS_DELIVERY",
            StateId::EmotionCheck => "EMOTION_CHECK",
            StateId::AsdScreening => "ASD_SCREENING",
            StateId::Psychotherapy => "PSYCHOTHERAPY",
            StateId::Closing => "CLOSING",
        }
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StateId {
    type Err = DfaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StateId::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| DfaError::Schema(format!("unknown state `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    UserMessage,
    DifferentialsReady,
    DiagnosisReady,
    DistressDetected,
    CalmDetected,
    AsdPositive,
    AsdNegative,
    MedicalInfoRequest,
    CloseRequest,
    /// Catch-all for events without an explicit entry.
    Else,
}

impl EventKind {
    pub const ALL: [EventKind; 10] = [
        EventKind::UserMessage,
        EventKind::DifferentialsReady,
        EventKind::DiagnosisReady,
        EventKind::DistressDetected,
        EventKind::CalmDetected,
        EventKind::AsdPositive,
        EventKind::AsdNegative,
        EventKind::MedicalInfoRequest,
        EventKind::CloseRequest,
        EventKind::Else,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::UserMessage => "USER_MESSAGE",
            EventKind::DifferentialsReady => "DIFFERENTIALS_READY",
            EventKind::DiagnosisReady => "DIAGNOSIS_READY",
            EventKind::DistressDetected => "DISTRESS_DETECTED",
            EventKind::CalmDetected => "CALM_DETECTED",
            EventKind::AsdPositive => "ASD_POSITIVE",
            EventKind::AsdNegative => "ASD_NEGATIVE",
            EventKind::MedicalInfoRequest => "MEDICAL_INFO_REQUEST",
            EventKind::CloseRequest => "CLOSE_REQUEST",
            EventKind::Else => "ELSE",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = DfaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|ev| ev.as_str() == s)
            .ok_or_else(|| DfaError::Schema(format!("unknown event `{s}`")))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DfaError {
    #[error("malformed DFA definition: {0}")]
    Schema(String),
    #[error("no transition for ({state}, {event}) and no ELSE entry")]
    MissingTransition { state: StateId, event: EventKind },
    #[error("state {0} is not declared in this DFA")]
    UnknownState(StateId),
    #[error("event {0} is not declared in this DFA")]
    UnknownEvent(EventKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: StateId,
    pub event: EventKind,
    pub to: StateId,
}

/// On-disk shape of a definition file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DfaFile {
    dfa_version: u32,
    states: Vec<StateId>,
    events: Vec<EventKind>,
    start: StateId,
    terminals: Vec<StateId>,
    #[serde(default)]
    transitions: Vec<Transition>,
}

/// A loaded automaton. Transitions are kept as declared (duplicates
/// included) so that validation can report nondeterminism; lookups use the
/// first entry for each key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfaDefinition {
    states: BTreeSet<StateId>,
    events: BTreeSet<EventKind>,
    start: StateId,
    terminals: BTreeSet<StateId>,
    transitions: Vec<Transition>,
    delta: BTreeMap<(StateId, EventKind), StateId>,
}

impl DfaDefinition {
    pub fn new(
        states: impl IntoIterator<Item = StateId>,
        events: impl IntoIterator<Item = EventKind>,
        start: StateId,
        terminals: impl IntoIterator<Item = StateId>,
        transitions: Vec<Transition>,
    ) -> Result<Self, DfaError> {
        let states: BTreeSet<_> = states.into_iter().collect();
        let events: BTreeSet<_> = events.into_iter().collect();
        let terminals: BTreeSet<_> = terminals.into_iter().collect();
        if !states.contains(&start) {
            return Err(DfaError::Schema(format!("start state {start} not declared")));
        }
        if let Some(t) = terminals.iter().find(|t| !states.contains(t)) {
            return Err(DfaError::Schema(format!("terminal state {t} not declared")));
        }
        let mut delta = BTreeMap::new();
        for (i, tr) in transitions.iter().enumerate() {
            if !states.contains(&tr.from) || !states.contains(&tr.to) {
                return Err(DfaError::Schema(format!(
                    "transition #{i} references an undeclared state ({} -> {})",
                    tr.from, tr.to
                )));
            }
            if !events.contains(&tr.event) {
                return Err(DfaError::Schema(format!(
                    "transition #{i} references undeclared event {}",
                    tr.event
                )));
            }
            delta.entry((tr.from, tr.event)).or_insert(tr.to);
        }
        Ok(Self {
            states,
            events,
            start,
            terminals,
            transitions,
            delta,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, DfaError> {
        let file: DfaFile =
            serde_json::from_str(text).map_err(|e| DfaError::Schema(e.to_string()))?;
        if file.dfa_version != DFA_SCHEMA_VERSION {
            return Err(DfaError::Schema(format!(
                "unsupported dfa_version {} (expected {DFA_SCHEMA_VERSION})",
                file.dfa_version
            )));
        }
        Self::new(
            file.states,
            file.events,
            file.start,
            file.terminals,
            file.transitions,
        )
    }

    pub fn to_json(&self) -> String {
        let file = DfaFile {
            dfa_version: DFA_SCHEMA_VERSION,
            states: self.states.iter().copied().collect(),
            events: self.events.iter().copied().collect(),
            start: self.start,
            terminals: self.terminals.iter().copied().collect(),
            transitions: self.transitions.clone(),
        };
        serde_json::to_string_pretty(&file).expect("DFA serializes")
    }

    /// The automaton shipped with the engine.
    pub fn bundled() -> Self {
        Self::from_json(crate::assets::DFA_JSON).expect("bundled DFA parses")
    }

    pub fn version(&self) -> u32 {
        DFA_SCHEMA_VERSION
    }

    pub fn states(&self) -> &BTreeSet<StateId> {
        &self.states
    }

    pub fn events(&self) -> &BTreeSet<EventKind> {
        &self.events
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn terminals(&self) -> &BTreeSet<StateId> {
        &self.terminals
    }

    pub fn is_terminal(&self, state: StateId) -> bool {
        self.terminals.contains(&state)
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Deduplicated transition function, sorted by (state, event).
    pub fn delta(&self) -> &BTreeMap<(StateId, EventKind), StateId> {
        &self.delta
    }

    fn successors(&self, state: StateId) -> impl Iterator<Item = StateId> + '_ {
        self.delta
            .range((state, EventKind::UserMessage)..=(state, EventKind::Else))
            .map(|(_, to)| *to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    Nondeterministic,
    MissingTransition,
    UnreachableState,
    DeadState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "DFA ok");
        }
        writeln!(f, "DFA has {} violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {:?}: {}", v.kind, v.detail)?;
        }
        Ok(())
    }
}

/// Checks determinism, totality, reachability from start and co-reachability
/// of a terminal. Every violation is listed; nothing short-circuits.
pub fn validate_dfa(dfa: &DfaDefinition) -> ValidationReport {
    let mut violations = Vec::new();

    let mut seen: BTreeMap<(StateId, EventKind), Vec<StateId>> = BTreeMap::new();
    for tr in &dfa.transitions {
        seen.entry((tr.from, tr.event)).or_default().push(tr.to);
    }
    for ((from, event), targets) in &seen {
        if targets.len() > 1 {
            let list: Vec<_> = targets.iter().map(|s| s.as_str()).collect();
            violations.push(Violation {
                kind: ViolationKind::Nondeterministic,
                detail: format!("({from}, {event}) has {} entries: {}", targets.len(), list.join(", ")),
            });
        }
    }

    for &state in dfa.states.iter().filter(|s| !dfa.is_terminal(**s)) {
        if dfa.delta.contains_key(&(state, EventKind::Else)) {
            continue;
        }
        let missing: Vec<_> = dfa
            .events
            .iter()
            .filter(|ev| !dfa.delta.contains_key(&(state, **ev)))
            .map(|ev| ev.as_str())
            .collect();
        if !missing.is_empty() {
            violations.push(Violation {
                kind: ViolationKind::MissingTransition,
                detail: format!("{state} has no ELSE entry and no transition for: {}", missing.join(", ")),
            });
        }
    }

    let reachable = forward_closure(dfa, dfa.start);
    for state in dfa.states.iter().filter(|s| !reachable.contains(s)) {
        violations.push(Violation {
            kind: ViolationKind::UnreachableState,
            detail: format!("{state} is not reachable from {}", dfa.start),
        });
    }

    let co_reachable = backward_closure(dfa, &dfa.terminals);
    for state in dfa.states.iter().filter(|s| !co_reachable.contains(s)) {
        violations.push(Violation {
            kind: ViolationKind::DeadState,
            detail: format!("no terminal state is reachable from {state}"),
        });
    }

    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}

fn forward_closure(dfa: &DfaDefinition, from: StateId) -> BTreeSet<StateId> {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(s) = queue.pop_front() {
        if dfa.is_terminal(s) {
            continue;
        }
        for next in dfa.successors(s) {
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen
}

fn backward_closure(dfa: &DfaDefinition, targets: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    let mut seen = targets.clone();
    let mut changed = true;
    while changed {
        changed = false;
        for (&(from, _), to) in &dfa.delta {
            if !dfa.is_terminal(from) && seen.contains(to) && seen.insert(from) {
                changed = true;
            }
        }
    }
    seen
}

/// Advances the automaton by one event. Terminal states absorb every event.
pub fn step(dfa: &DfaDefinition, state: StateId, event: EventKind) -> Result<StateId, DfaError> {
    if !dfa.states.contains(&state) {
        return Err(DfaError::UnknownState(state));
    }
    if !dfa.events.contains(&event) {
        return Err(DfaError::UnknownEvent(event));
    }
    if dfa.is_terminal(state) {
        return Ok(state);
    }
    dfa.delta
        .get(&(state, event))
        .or_else(|| dfa.delta.get(&(state, EventKind::Else)))
        .copied()
        .ok_or(DfaError::MissingTransition { state, event })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub event: EventKind,
    pub state_after: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub initial: StateId,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn final_state(&self) -> StateId {
        self.steps.last().map_or(self.initial, |s| s.state_after)
    }

    /// True when replaying every event reproduces each recorded state.
    pub fn replays_on(&self, dfa: &DfaDefinition) -> bool {
        let mut state = self.initial;
        for s in &self.steps {
            match step(dfa, state, s.event) {
                Ok(next) if next == s.state_after => state = next,
                _ => return false,
            }
        }
        true
    }
}

pub fn run_trace(dfa: &DfaDefinition, events: &[EventKind]) -> Result<Trace, DfaError> {
    run_trace_from(dfa, dfa.start, events)
}

pub fn run_trace_from(
    dfa: &DfaDefinition,
    initial: StateId,
    events: &[EventKind],
) -> Result<Trace, DfaError> {
    let mut state = initial;
    let mut steps = Vec::with_capacity(events.len());
    for &event in events {
        state = step(dfa, state, event)?;
        steps.push(TraceStep {
            event,
            state_after: state,
        });
    }
    Ok(Trace { initial, steps })
}

/// DOT rendering with one edge per delta entry, in (state, event) order.
pub fn export_graph(dfa: &DfaDefinition) -> String {
    let mut out = String::from("digraph otiz {\n  rankdir=LR;\n");
    for state in &dfa.states {
        let shape = if dfa.is_terminal(*state) {
            "doublecircle"
        } else {
            "circle"
        };
        let start = if *state == dfa.start { ", style=bold" } else { "" };
        out.push_str(&format!("  \"{state}\" [shape={shape}{start}];\n"));
    }
    for (&(from, event), to) in &dfa.delta {
        out.push_str(&format!("  \"{from}\" -> \"{to}\" [label=\"{event}\"];\n"));
    }
    out.push_str("}\n");
    out
}

/// Reads the edge list back out of [`export_graph`] output.
pub fn parse_graph_edges(dot: &str) -> Result<Vec<Transition>, DfaError> {
    let edge = regex::Regex::new(r#"^\s*"([A-Z_]+)"\s*->\s*"([A-Z_]+)"\s*\[label="([A-Z_]+)"\];\s*$"#)
        .expect("edge pattern compiles");
    dot.lines()
        .filter_map(|line| edge.captures(line))
        .map(|c| {
            Ok(Transition {
                from: c[1].parse()?,
                to: c[2].parse()?,
                event: c[3].parse()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state() -> DfaDefinition {
        DfaDefinition::new(
            [StateId::Closing],
            EventKind::ALL,
            StateId::Closing,
            [StateId::Closing],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn bundled_dfa_is_valid() {
        let report = validate_dfa(&DfaDefinition::bundled());
        assert!(report.ok, "{report}");
    }

    #[test]
    fn single_state_dfa_is_valid() {
        assert!(validate_dfa(&single_state()).ok);
    }

    #[test]
    fn duplicate_entry_is_nondeterministic() {
        let mut transitions = DfaDefinition::bundled().transitions().to_vec();
        transitions.push(Transition {
            from: StateId::Intake,
            event: EventKind::UserMessage,
            to: StateId::Intake,
        });
        let dfa = DfaDefinition::new(
            StateId::ALL,
            EventKind::ALL,
            StateId::Intake,
            [StateId::Closing],
            transitions,
        )
        .unwrap();
        let report = validate_dfa(&dfa);
        assert!(!report.ok);
        assert!(report.has(ViolationKind::Nondeterministic));
    }

    #[test]
    fn missing_else_is_reported() {
        let transitions = DfaDefinition::bundled()
            .transitions()
            .iter()
            .copied()
            .filter(|t| !(t.from == StateId::Psychotherapy && t.event == EventKind::Else))
            .collect();
        let dfa = DfaDefinition::new(
            StateId::ALL,
            EventKind::ALL,
            StateId::Intake,
            [StateId::Closing],
            transitions,
        )
        .unwrap();
        let report = validate_dfa(&dfa);
        assert!(report.has(ViolationKind::MissingTransition));
        assert_eq!(
            step(&dfa, StateId::Psychotherapy, EventKind::AsdPositive),
            Err(DfaError::MissingTransition {
                state: StateId::Psychotherapy,
                event: EventKind::AsdPositive
            })
        );
    }

    #[test]
    fn unreachable_and_dead_states_are_reported() {
        let dfa = DfaDefinition::new(
            [StateId::Intake, StateId::Psychotherapy, StateId::Closing],
            [EventKind::UserMessage, EventKind::Else],
            StateId::Intake,
            [StateId::Closing],
            vec![
                Transition { from: StateId::Intake, event: EventKind::Else, to: StateId::Intake },
                Transition { from: StateId::Psychotherapy, event: EventKind::Else, to: StateId::Closing },
            ],
        )
        .unwrap();
        let report = validate_dfa(&dfa);
        assert!(report.has(ViolationKind::UnreachableState));
        assert!(report.has(ViolationKind::DeadState));
        assert_eq!(report.violations.len(), 3, "{report}");
    }

    #[test]
    fn step_examples() {
        let dfa = DfaDefinition::bundled();
        assert_eq!(
            step(&dfa, StateId::EmotionCheck, EventKind::MedicalInfoRequest).unwrap(),
            StateId::ComplaintAnalysis
        );
        assert_eq!(
            step(&dfa, StateId::Closing, EventKind::UserMessage).unwrap(),
            StateId::Closing
        );
        assert_eq!(
            step(&dfa, StateId::DiagnosisDelivery, EventKind::DistressDetected).unwrap(),
            StateId::EmotionCheck
        );
    }

    #[test]
    fn trace_examples() {
        let dfa = DfaDefinition::bundled();
        let empty = run_trace(&dfa, &[]).unwrap();
        assert_eq!(empty.initial, StateId::Intake);
        assert!(empty.steps.is_empty());

        let t = run_trace(
            &dfa,
            &[
                EventKind::UserMessage,
                EventKind::DifferentialsReady,
                EventKind::DiagnosisReady,
            ],
        )
        .unwrap();
        assert_eq!(t.final_state(), StateId::DiagnosisDelivery);
        assert!(t.replays_on(&dfa));
    }

    #[test]
    fn export_single_state() {
        let dot = export_graph(&single_state());
        assert_eq!(dot.matches("shape=").count(), 1);
        assert_eq!(dot.matches("->").count(), 0);
    }

    #[test]
    fn export_bundled_round_trips() {
        let dfa = DfaDefinition::bundled();
        let dot = export_graph(&dfa);
        assert_eq!(dot, export_graph(&dfa));
        assert_eq!(dot.matches("->").count(), dfa.transitions().len());
        let edges = parse_graph_edges(&dot).unwrap();
        let rebuilt: BTreeMap<_, _> = edges.iter().map(|t| ((t.from, t.event), t.to)).collect();
        assert_eq!(&rebuilt, dfa.delta());
    }

    #[test]
    fn json_round_trip() {
        let dfa = DfaDefinition::bundled();
        assert_eq!(DfaDefinition::from_json(&dfa.to_json()).unwrap(), dfa);
    }

    #[test]
    fn rejects_wrong_version_and_unknown_names() {
        let bad = crate::assets::DFA_JSON.replace("\"dfa_version\": 1", "\"dfa_version\": 2");
        assert!(matches!(DfaDefinition::from_json(&bad), Err(DfaError::Schema(_))));
        let bad = crate::assets::DFA_JSON.replacen("\"INTAKE\"", "\"LOBBY\"", 1);
        assert!(matches!(DfaDefinition::from_json(&bad), Err(DfaError::Schema(_))));
    }
}
