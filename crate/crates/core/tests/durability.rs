use std::path::Path;
use std::sync::Arc;

use otiz_core::llm::MockBackend;
use otiz_core::session::{check_store, Fault, SequentialIds, SessionError, SessionManager, StepClock};
use otiz_core::{Engine, EngineConfig, StateId};

fn manager(dir: &Path) -> SessionManager {
    let engine = Engine::new(Arc::new(MockBackend::bundled()), EngineConfig::default());
    SessionManager::with_sources(engine, dir, Arc::new(StepClock::default()), Arc::new(SequentialIds::default())).unwrap()
}

fn log_lines(dir: &Path, id: &str) -> Vec<String> {
    std::fs::read_to_string(dir.join("sessions").join(format!("{id}.jsonl")))
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

#[test]
fn torn_write_recovers_last_persisted_turn() {
    let dir = tempfile::tempdir().unwrap();
    let (id, before) = {
        let m = manager(dir.path());
        let s = m.create_session().unwrap();
        m.post_message(&s.id, "I have burning when I pee").unwrap();
        m.post_message(&s.id, "yes").unwrap();
        let before = m.get_session(&s.id).unwrap();
        m.store().inject_fault(Fault::TornWrite);
        let err = m.post_message(&s.id, "no").unwrap_err();
        assert!(matches!(err, SessionError::Storage(_)));
        (s.id, before)
    };

    let m = manager(dir.path());
    let after = m.get_session(&id).unwrap();
    assert_eq!(after, before);
    assert_eq!(after.turns.len(), 2);
    for line in log_lines(dir.path(), &id) {
        serde_json::from_str::<serde_json::Value>(&line).unwrap();
    }
    let r = m.post_message(&id, "no").unwrap();
    assert_eq!(r.state_before, before.conversation.dfa_state);
    assert_eq!(m.get_transcript(&id).unwrap().last().unwrap().index, 2);
    assert!(check_store(dir.path(), &m.engine().dfa).unwrap().ok());
}

#[test]
fn concurrent_posts_are_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let m = Arc::new(manager(dir.path()));
    let id = m.create_session().unwrap().id;
    std::thread::scope(|scope| {
        for i in 0..100 {
            let m = m.clone();
            let id = id.clone();
            scope.spawn(move || m.post_message(&id, &format!("hello there {i}")).unwrap());
        }
    });
    let turns = m.get_transcript(&id).unwrap();
    assert_eq!(turns.iter().map(|t| t.index).collect::<Vec<_>>(), (0..100).collect::<Vec<_>>());
    for w in turns.windows(2) {
        assert_eq!(w[0].state_after, w[1].state_before);
    }
    let reloaded = manager(dir.path()).get_transcript(&id).unwrap();
    assert_eq!(reloaded, turns);
}

#[test]
fn identical_inputs_give_identical_logs() {
    let script = [
        "I have painful blisters on my penis that appeared after a new partner.",
        "What is the treatment for this?",
        "I'm really scared and anxious about this.",
        "Yes",
        "Thank you, goodbye.",
    ];
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let m = manager(dir.path());
        let s = m.create_session().unwrap();
        for t in script {
            m.post_message(&s.id, t).unwrap();
        }
        assert_eq!(m.get_session(&s.id).unwrap().conversation.dfa_state, StateId::Closing);
        std::fs::read(dir.path().join("sessions").join(format!("{}.jsonl", s.id))).unwrap()
    };
    assert_eq!(run(), run());
}
