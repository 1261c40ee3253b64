//! Layered system-prompt assembly and tone/professionalism scoring.
//!
//! A prompt is five layers in fixed order: persona, metacognition, ethics,
//! adaptive communication and the module task for the current dialogue
//! state. Templates use `{{name}}` placeholders.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets;
use crate::dfa::StateId;
use crate::text::{self, Phrase};

/// Instruction that every assembled prompt must carry verbatim.
pub const PROFESSIONAL_EVALUATION_INSTRUCTION: &str = "Always recommend professional medical evaluation.";
pub const PROMPT_LIBRARY_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ToneScore(u8);

impl ToneScore {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 10;

    /// Clamps into `[1, 10]`.
    pub fn new(value: i32) -> Self {
        Self(value.clamp(Self::MIN as i32, Self::MAX as i32) as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl Default for ToneScore {
    fn default() -> Self {
        Self(BASE_TONE as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProfessionalismLevel(u8);

impl ProfessionalismLevel {
    pub const FLOOR: u8 = 4;

    pub fn value(self) -> u8 {
        self.0
    }
}

pub fn professionalism_for(tone: ToneScore) -> ProfessionalismLevel {
    ProfessionalismLevel(tone.value().max(ProfessionalismLevel::FLOOR))
}

const BASE_TONE: i32 = 7;
const SLANG_DENSITY: f64 = 0.2;

static PROFANITY: LazyLock<Vec<Phrase>> = LazyLock::new(|| {
    text::phrases(&[
        "fuck*", "shit*", "damn", "damned", "crap", "crappy", "bitch*", "bastard", "asshole",
        "wtf", "bloody", "piss*", "dick", "cock", "bollocks",
    ])
});

static SLANG: LazyLock<Vec<Phrase>> = LazyLock::new(|| {
    text::phrases(&[
        "gonna", "wanna", "gotta", "lol", "u", "ur", "dunno", "ya", "nah", "kinda", "sorta",
        "bro", "dude", "omg", "idk", "thx", "pls", "plz", "cuz", "coz", "lemme", "ain't", "y'all",
        "tbh", "rn", "smth", "sth", "down there", "thingy",
    ])
});

static FORMAL: LazyLock<Vec<Phrase>> = LazyLock::new(|| {
    text::phrases(&[
        "would like", "i would", "could you please", "kindly", "regarding", "consult*",
        "physician", "clinical", "lesion", "lesions", "examination", "i appreciate",
        "symptom*", "diagnosis", "genital", "urethral", "respectfully",
    ])
});

/// Lexical tone heuristic: base 7, -2 per profanity, -1 when slang exceeds
/// 20% of tokens, +1 when any formal marker occurs; clamped to `[1, 10]`.
pub fn assess_tone(text: &str) -> ToneScore {
    let toks = text::tokens(text);
    if toks.is_empty() {
        return ToneScore::new(BASE_TONE);
    }
    let mut score = BASE_TONE;
    score -= 2 * text::count_phrases(&toks, &PROFANITY) as i32;
    let slang = text::count_phrases(&toks, &SLANG);
    if slang as f64 / toks.len() as f64 > SLANG_DENSITY {
        score -= 1;
    }
    if text::count_phrases(&toks, &FORMAL) > 0 {
        score += 1;
    }
    ToneScore::new(score)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaSpec {
    pub role: String,
    pub traits: Vec<String>,
}

impl Default for PersonaSpec {
    fn default() -> Self {
        Self {
            role: "Expert venereologist physician".to_owned(),
            traits: vec![
                "a consummate professional".to_owned(),
                "witty".to_owned(),
                "warm and kind".to_owned(),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Persona,
    Metacognition,
    Ethics,
    Adaptive,
    ModuleTask,
}

impl LayerKind {
    pub const ORDER: [LayerKind; 5] = [
        LayerKind::Persona,
        LayerKind::Metacognition,
        LayerKind::Ethics,
        LayerKind::Adaptive,
        LayerKind::ModuleTask,
    ];
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LayerKind::Persona => "persona",
            LayerKind::Metacognition => "metacognition",
            LayerKind::Ethics => "ethics",
            LayerKind::Adaptive => "adaptive",
            LayerKind::ModuleTask => "module_task",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptLayer {
    pub kind: LayerKind,
    pub template: String,
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssembledPrompt {
    pub text: String,
    pub layers_used: Vec<LayerKind>,
    pub placeholders_resolved: BTreeMap<String, String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("missing prompt layer: {0}")]
    MissingLayer(LayerKind),
    #[error("prompt layer {0} supplied more than once")]
    DuplicateLayer(LayerKind),
    #[error("prompt layer orders must increase persona < metacognition < ethics < adaptive < module_task")]
    LayerOrder,
    #[error("unresolved placeholder {{{{{0}}}}}")]
    UnresolvedPlaceholder(String),
    #[error("assembled prompt lacks required text: {0}")]
    MissingInstruction(String),
    #[error("cannot read prompt template {path}: {message}")]
    Io { path: String, message: String },
}

static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{\{\s*([a-z_][a-z0-9_]*)\s*\}\}").expect("placeholder pattern"));

/// The tag the mock backend reads to recover the dialogue state.
pub fn state_tag(state: StateId) -> String {
    format!("[state:{state}]")
}

pub fn parse_state_tag(text: &str) -> Option<StateId> {
    static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[state:([A-Z_]+)\]").expect("tag pattern"));
    TAG.captures(text).and_then(|c| c[1].parse().ok())
}

fn join_traits(traits: &[String]) -> String {
    match traits {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{}, and {}", init.join(", "), last),
    }
}

/// Concatenates the five layers in order and resolves every placeholder.
/// `role`, `traits`, `tone`, `professionalism` and `state_tag` are supplied
/// here; everything else must come from `context`.
pub fn assemble(
    persona: &PersonaSpec,
    layers: &[PromptLayer],
    state: StateId,
    tone: ToneScore,
    context: &BTreeMap<String, String>,
) -> Result<AssembledPrompt, PromptError> {
    let mut ordered: Vec<&PromptLayer> = Vec::with_capacity(LayerKind::ORDER.len());
    for kind in LayerKind::ORDER {
        let mut matching = layers.iter().filter(|l| l.kind == kind);
        let layer = matching.next().ok_or(PromptError::MissingLayer(kind))?;
        if matching.next().is_some() {
            return Err(PromptError::DuplicateLayer(kind));
        }
        if ordered.last().is_some_and(|prev| prev.order >= layer.order) {
            return Err(PromptError::LayerOrder);
        }
        ordered.push(layer);
    }

    let mut values = context.clone();
    values.insert("role".into(), persona.role.clone());
    values.insert("traits".into(), join_traits(&persona.traits));
    values.insert("tone".into(), tone.value().to_string());
    values.insert("professionalism".into(), professionalism_for(tone).value().to_string());
    values.insert("state_tag".into(), state_tag(state));

    let mut resolved = BTreeMap::new();
    let mut sections = Vec::with_capacity(ordered.len());
    for layer in &ordered {
        let mut missing = None;
        let body = PLACEHOLDER.replace_all(&layer.template, |c: &regex::Captures<'_>| {
            let name = &c[1];
            match values.get(name) {
                Some(v) => {
                    resolved.insert(name.to_owned(), v.clone());
                    v.clone()
                }
                None => {
                    missing.get_or_insert_with(|| name.to_owned());
                    String::new()
                }
            }
        });
        if let Some(name) = missing {
            return Err(PromptError::UnresolvedPlaceholder(name));
        }
        sections.push(body.trim().to_owned());
    }
    let text = sections.join("\n\n") + "\n";

    if text.contains("{{") {
        return Err(PromptError::UnresolvedPlaceholder("{{".into()));
    }
    for required in [persona.role.as_str(), PROFESSIONAL_EVALUATION_INSTRUCTION] {
        if !text.contains(required) {
            return Err(PromptError::MissingInstruction(required.to_owned()));
        }
    }

    Ok(AssembledPrompt {
        text,
        layers_used: ordered.iter().map(|l| l.kind).collect(),
        placeholders_resolved: resolved,
    })
}

/// The versioned template set, either bundled or read from a `prompts/`
/// directory with the same layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptLibrary {
    pub persona: PersonaSpec,
    persona_layer: String,
    metacognition: String,
    ethics: String,
    adaptive: String,
    generic_focus: String,
    module_tasks: BTreeMap<StateId, String>,
}

impl PromptLibrary {
    pub fn bundled() -> Self {
        Self {
            persona: PersonaSpec::default(),
            persona_layer: assets::PERSONA_TEMPLATE.to_owned(),
            metacognition: assets::METACOGNITION_TEMPLATE.to_owned(),
            ethics: assets::ETHICS_TEMPLATE.to_owned(),
            adaptive: assets::ADAPTIVE_TEMPLATE.to_owned(),
            generic_focus: assets::GENERIC_FOCUS.trim().to_owned(),
            module_tasks: assets::MODULE_TASK_TEMPLATES
                .iter()
                .map(|(state, t)| (state.parse().expect("bundled state name"), (*t).to_owned()))
                .collect(),
        }
    }

    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let read = |rel: String| {
            let path = dir.join(&rel);
            std::fs::read_to_string(&path).map_err(|e| PromptError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        };
        let v = PROMPT_LIBRARY_VERSION;
        let mut module_tasks = BTreeMap::new();
        for state in StateId::ALL {
            module_tasks.insert(state, read(format!("module_task/{state}.v{v}.txt"))?);
        }
        Ok(Self {
            persona: PersonaSpec::default(),
            persona_layer: read(format!("persona.v{v}.txt"))?,
            metacognition: read(format!("metacognition.v{v}.txt"))?,
            ethics: read(format!("ethics.v{v}.txt"))?,
            adaptive: read(format!("adaptive.v{v}.txt"))?,
            generic_focus: read(format!("generic_focus.v{v}.txt"))?.trim().to_owned(),
            module_tasks,
        })
    }

    pub fn generic_focus(&self) -> &str {
        &self.generic_focus
    }

    pub fn layers_for(&self, state: StateId) -> Vec<PromptLayer> {
        let module = self.module_tasks.get(&state).cloned().unwrap_or_default();
        [
            (LayerKind::Persona, &self.persona_layer),
            (LayerKind::Metacognition, &self.metacognition),
            (LayerKind::Ethics, &self.ethics),
            (LayerKind::Adaptive, &self.adaptive),
            (LayerKind::ModuleTask, &module),
        ]
        .into_iter()
        .zip(1u32..)
        .map(|((kind, template), i)| PromptLayer {
            kind,
            template: template.clone(),
            order: i * 10,
        })
        .collect()
    }

    pub fn assemble_for(
        &self,
        state: StateId,
        tone: ToneScore,
        context: &BTreeMap<String, String>,
    ) -> Result<AssembledPrompt, PromptError> {
        assemble(&self.persona, &self.layers_for(state), state, tone, context)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn context() -> BTreeMap<String, String> {
        BTreeMap::from([
            ("condition_focus".to_owned(), "focus".to_owned()),
            ("agent_draft".to_owned(), "draft".to_owned()),
            ("differentials".to_owned(), "none".to_owned()),
        ])
    }

    #[test]
    fn tone_examples() {
        assert_eq!(assess_tone("").value(), 7);
        assert_eq!(assess_tone("this fucking sore is shit").value(), 3);
        assert_eq!(
            assess_tone("I would like to consult regarding a genital lesion.").value(),
            8
        );
        assert_eq!(assess_tone("lol idk bro it hurts").value(), 6);
        assert_eq!(assess_tone("fuck fuck fuck fuck fuck").value(), 1);
    }

    #[test]
    fn professionalism_floor() {
        assert_eq!(professionalism_for(ToneScore::new(2)).value(), 4);
        assert_eq!(professionalism_for(ToneScore::new(10)).value(), 10);
        let mut prev = 0;
        for t in 1..=10 {
            let p = professionalism_for(ToneScore::new(t)).value();
            assert!((4..=10).contains(&p));
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn assembles_all_layers_in_order() {
        let lib = PromptLibrary::bundled();
        let p = lib.assemble_for(StateId::DiagnosisDelivery, ToneScore::new(5), &context()).unwrap();
        assert!(p.text.contains("Expert venereologist physician"));
        assert!(p.text.contains(PROFESSIONAL_EVALUATION_INSTRUCTION));
        assert!(p.text.contains("professionalism level 5"));
        assert_eq!(p.layers_used, LayerKind::ORDER);
        assert_eq!(parse_state_tag(&p.text), Some(StateId::DiagnosisDelivery));
        assert!(!PLACEHOLDER.is_match(&p.text));
    }

    #[test]
    fn missing_context_names_placeholder() {
        let lib = PromptLibrary::bundled();
        let mut ctx = context();
        ctx.remove("agent_draft");
        assert_eq!(
            lib.assemble_for(StateId::Intake, ToneScore::new(7), &ctx),
            Err(PromptError::UnresolvedPlaceholder("agent_draft".into()))
        );
    }

    #[test]
    fn missing_and_misordered_layers() {
        let lib = PromptLibrary::bundled();
        let persona = PersonaSpec::default();
        let mut layers = lib.layers_for(StateId::Intake);
        layers.remove(2);
        assert_eq!(
            assemble(&persona, &layers, StateId::Intake, ToneScore::new(7), &context()),
            Err(PromptError::MissingLayer(LayerKind::Ethics))
        );
        let mut layers = lib.layers_for(StateId::Intake);
        layers[0].order = 99;
        assert_eq!(
            assemble(&persona, &layers, StateId::Intake, ToneScore::new(7), &context()),
            Err(PromptError::LayerOrder)
        );
    }

    #[test]
    fn deterministic() {
        let lib = PromptLibrary::bundled();
        let a = lib.assemble_for(StateId::Psychotherapy, ToneScore::new(3), &context()).unwrap();
        let b = lib.assemble_for(StateId::Psychotherapy, ToneScore::new(3), &context()).unwrap();
        assert_eq!(a.text.as_bytes(), b.text.as_bytes());
    }

    #[test]
    fn directory_matches_bundled() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../prompts");
        assert_eq!(PromptLibrary::load_dir(&dir).unwrap(), PromptLibrary::bundled());
    }
}
