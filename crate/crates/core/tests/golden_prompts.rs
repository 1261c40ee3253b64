use std::collections::BTreeMap;
use std::path::PathBuf;

use otiz_core::prompt::{PromptLibrary, ToneScore};
use otiz_core::StateId;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../prompts/golden")
}

/// Every (state, tone) prompt matches its snapshot. Set OTIZ_UPDATE_GOLDEN=1
/// to rewrite the snapshots.
#[test]
fn assembled_prompts_match_snapshots() {
    let lib = PromptLibrary::bundled();
    let update = std::env::var("OTIZ_UPDATE_GOLDEN").is_ok_and(|v| v == "1");
    let context = BTreeMap::from([
        ("condition_focus".to_owned(), lib.generic_focus().trim().to_owned()),
        ("agent_draft".to_owned(), "<agent draft>".to_owned()),
        ("differentials".to_owned(), "<differentials>".to_owned()),
    ]);
    let mut mismatches = Vec::new();
    let mut count = 0;
    for state in StateId::ALL {
        for tone in 1..=10 {
            let text = lib.assemble_for(state, ToneScore::new(tone), &context).unwrap().text;
            let path = golden_dir().join(format!("{state}.tone{tone:02}.txt"));
            count += 1;
            if update {
                std::fs::write(&path, &text).unwrap();
            } else if std::fs::read_to_string(&path).ok().as_deref() != Some(text.as_str()) {
                mismatches.push(path.display().to_string());
            }
        }
    }
    assert_eq!(count, 80);
    assert!(mismatches.is_empty(), "stale snapshots: {mismatches:?}");
}

#[test]
fn bundled_library_matches_prompt_directory() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../prompts");
    assert_eq!(PromptLibrary::load_dir(&dir).unwrap(), PromptLibrary::bundled());
}
