//! Data files shipped with the engine, embedded at build time.

pub const DFA_JSON: &str = include_str!("../../../data/dfa.json");
pub const KB_JSON: &str = include_str!("../../../data/kb.json");
pub const CORPUS_JSON: &str = include_str!("../../../data/corpus.json");
pub const CODEBOOK_JSON: &str = include_str!("../../../data/codebook.json");
pub const MOCK_SCRIPT_JSON: &str = include_str!("../../../data/mock_script.json");

pub const PERSONA_TEMPLATE: &str = include_str!("../../../prompts/persona.v1.txt");
pub const METACOGNITION_TEMPLATE: &str = include_str!("../../../prompts/metacognition.v1.txt");
pub const ETHICS_TEMPLATE: &str = include_str!("../../../prompts/ethics.v1.txt");
pub const ADAPTIVE_TEMPLATE: &str = include_str!("../../../prompts/adaptive.v1.txt");
pub const GENERIC_FOCUS: &str = include_str!("../../../prompts/generic_focus.v1.txt");

/// Module task templates, one per dialogue state, keyed by state name.
pub const MODULE_TASK_TEMPLATES: [(&str, &str); 8] = [
    ("INTAKE", include_str!("../../../prompts/module_task/INTAKE.v1.txt")),
    ("COMPLAINT_ANALYSIS", include_str!("../../../prompts/module_task/COMPLAINT_ANALYSIS.v1.txt")),
    ("FOLLOW_UP_QUESTIONING", include_str!("../../../prompts/module_task/FOLLOW_UP_QUESTIONING.v1.txt")),
    ("DIAGNOSIS_DELIVERY", include_str!("../../../prompts/module_task/DIAGNOSIS_DELIVERY.v1.txt")),
    ("EMOTION_CHECK", include_str!("../../../prompts/module_task/EMOTION_CHECK.v1.txt")),
    ("ASD_SCREENING", include_str!("../../../prompts/module_task/ASD_SCREENING.v1.txt")),
    ("PSYCHOTHERAPY", include_str!("../../../prompts/module_task/PSYCHOTHERAPY.v1.txt")),
    ("CLOSING", include_str!("../../../prompts/module_task/CLOSING.v1.txt")),
];
