use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::Duration;

use otiz_core::session::{read_log, Session};
use otiz_core::StateId;

const REPO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");

fn otiz(cwd: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_otiz"));
    c.current_dir(cwd);
    for (k, _) in std::env::vars() {
        if k.starts_with("OTIZ_") {
            c.env_remove(k);
        }
    }
    c.env("OTIZ_OFFLINE", "1");
    c
}

fn run(cwd: &Path, args: &[&str]) -> Output {
    otiz(cwd).args(args).output().unwrap()
}

fn run_stdin(cwd: &Path, args: &[&str], input: &str) -> Output {
    let mut child = otiz(cwd)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // The process may exit before reading its input (e.g. on a load error).
    let _ = child.stdin.take().unwrap().write_all(input.as_bytes());
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sessions(data: &Path) -> Vec<Session> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(data.join("sessions"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_log(p).unwrap().unwrap()).collect()
}

const WARTS_SCRIPT: &str = "I have rough cauliflower-like bumps on my penis that keep growing.\nYes\nYes\nYes\nYes\nYes\n/quit\n";

#[test]
fn validate_shipped_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("Corpus ok (30 prompts)"));
}

#[test]
fn validate_short_corpus_names_condition() {
    let dir = tempfile::tempdir().unwrap();
    let mut corpus: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{REPO}/data/corpus.json")).unwrap()).unwrap();
    let prompts = corpus["prompts"].as_array_mut().unwrap();
    let idx = prompts.iter().position(|p| p["condition_id"] == "primary_syphilis").unwrap();
    prompts.remove(idx);
    let path = dir.path().join("corpus.json");
    std::fs::write(&path, corpus.to_string()).unwrap();
    let o = run(dir.path(), &["validate", "--corpus", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("primary_syphilis has 4 prompts"), "{}", stdout(&o));
}

#[test]
fn validate_nondeterministic_dfa() {
    let dir = tempfile::tempdir().unwrap();
    let mut dfa: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{REPO}/data/dfa.json")).unwrap()).unwrap();
    let transitions = dfa["transitions"].as_array_mut().unwrap();
    let mut dup = transitions[0].clone();
    dup["to"] = serde_json::json!("CLOSING");
    transitions.push(dup);
    let path = dir.path().join("dfa.json");
    std::fs::write(&path, dfa.to_string()).unwrap();
    let o = run(dir.path(), &["validate", "--dfa", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("Nondeterministic"), "{}", stdout(&o));
}

#[test]
fn chat_reaches_diagnosis() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_stdin(dir.path(), &["chat", "--data-dir", "data"], WARTS_SCRIPT);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("  1. "));
    let s = sessions(&dir.path().join("data"));
    assert_eq!(s.len(), 1);
    assert!(s[0].turns.iter().any(|t| t.state_after == StateId::DiagnosisDelivery));

    let o = run(dir.path(), &["store", "check", "--data-dir", "data"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("store ok"));
}

#[test]
fn chat_suggestion_number_sends_its_text() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_stdin(dir.path(), &["chat", "--data-dir", "data"], "2\n/quit\n");
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let second = out
        .lines()
        .find_map(|l| l.strip_prefix("  2. "))
        .unwrap()
        .to_owned();
    let s = sessions(&dir.path().join("data"));
    assert_eq!(s[0].turns[0].user_text, second);
}

#[test]
fn chat_quit_immediately() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_stdin(dir.path(), &["chat", "--data-dir", "data"], "/quit\n");
    assert_eq!(o.status.code(), Some(0));
    let s = sessions(&dir.path().join("data"));
    assert!(s[0].turns.is_empty());
}

#[test]
fn chat_bad_kb() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_stdin(dir.path(), &["chat", "--kb", "missing.json"], "/quit\n");
    assert_eq!(o.status.code(), Some(1));

    let mut kb: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{REPO}/data/kb.json")).unwrap()).unwrap();
    kb["conditions"][0]["features"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!({ "feature": "fever", "weight": 1.0 }));
    let path = dir.path().join("kb.json");
    std::fs::write(&path, kb.to_string()).unwrap();
    let o = run_stdin(dir.path(), &["chat", "--kb", path.to_str().unwrap()], "/quit\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("integrity"), "{}", stderr(&o));
}

#[test]
fn live_mode_needs_credentials() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_stdin(dir.path(), &["chat", "--backend", "live"], "/quit\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("OTIZ_LLM_API_KEY"));
}

#[test]
fn config_file_and_env() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("otiz.toml"), "data_dir = \"from-file\"\n").unwrap();
    let o = run_stdin(dir.path(), &["chat"], "/quit\n");
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("from-file/sessions").is_dir());

    let o = otiz(dir.path())
        .env("OTIZ_DATA_DIR", "from-env")
        .args(["store", "check"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 session(s)"));

    std::fs::write(dir.path().join("broken.toml"), "port = \"x\"\n").unwrap();
    let o = run(dir.path(), &["--config", "broken.toml", "validate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn record_then_replay_matches() {
    let dir = tempfile::tempdir().unwrap();
    let recorded = run_stdin(dir.path(), &["chat", "--data-dir", "a", "--record", "demo"], WARTS_SCRIPT);
    assert_eq!(recorded.status.code(), Some(0), "{}", stderr(&recorded));
    assert!(dir.path().join("cassettes/demo.jsonl").is_file());
    let replayed = run_stdin(
        dir.path(),
        &["chat", "--data-dir", "b", "--backend", "replay", "--cassette", "demo"],
        WARTS_SCRIPT,
    );
    assert_eq!(replayed.status.code(), Some(0), "{}", stderr(&replayed));
    let body = |o: &Output| -> Vec<String> {
        stdout(o)
            .lines()
            .filter(|l| !l.starts_with("Session ") && !l.starts_with("Transcript saved"))
            .map(str::to_owned)
            .collect()
    };
    assert_eq!(body(&recorded), body(&replayed));

    let o = run_stdin(dir.path(), &["chat", "--backend", "replay", "--cassette", "nope"], "/quit\n");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn assign_study_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["eval", "assign", "--evaluators", "23", "--per-prompt", "2", "--cap", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(plan["assignments"].as_array().unwrap().len(), 60);

    let o = run(dir.path(), &["eval", "assign", "--evaluators", "3", "--per-prompt", "2", "--cap", "3", "--format", "table"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("infeasible"));

    std::fs::write(dir.path().join("ev.txt"), "alice\nbob\n").unwrap();
    let o = run(
        dir.path(),
        &["eval", "assign", "--evaluator-file", "ev.txt", "--per-prompt", "2", "--cap", "30", "--format", "table", "--out", "plan.tsv"],
    );
    assert_eq!(o.status.code(), Some(0));
    let plan = std::fs::read_to_string(dir.path().join("plan.tsv")).unwrap();
    assert_eq!(plan.lines().count(), 61);
}

#[test]
fn stats_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let records = format!("{REPO}/fixtures/study_records.jsonl");
    let o = run(dir.path(), &["eval", "stats", "--records", &records, "--exclude", "correctness"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.matches("5.0 ± 0.0 (5)").count(), 6, "{out}");
    assert!(out.contains("19 of 150 pairs"));

    let o = run(dir.path(), &["eval", "stats", "--records", &records, "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["agreement"]["total_pairs"], 180);
    assert_eq!(v["themes"]["evaluators"], 23);

    std::fs::write(dir.path().join("bad.jsonl"), "{\"prompt_id\": \"P01\"}\n").unwrap();
    let o = run(dir.path(), &["eval", "stats", "--records", "bad.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1"));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), &["eval", "simulate", "--seed", "7"]);
    let b = run(dir.path(), &["eval", "simulate", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("STI top-2 hit rate"));
    let j = run(dir.path(), &["eval", "simulate", "--seed", "7", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&j.stdout).unwrap();
    assert_eq!(v["cases"].as_array().unwrap().len(), 30);
}

#[test]
fn dfa_export_formats() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["dfa", "export"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("digraph"));
    let o = run(dir.path(), &["dfa", "export", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["transitions"].as_array().unwrap().len(), 28);
    let o = run(dir.path(), &["kb", "lint"]);
    assert_eq!(o.status.code(), Some(0));
}

fn get(addr: &str, path: &str) -> String {
    let mut s = std::net::TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nhost: localhost\r\nconnection: close\r\n\r\n").unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).unwrap();
    out
}

#[cfg(unix)]
#[test]
fn serve_health_and_sigterm() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = otiz(dir.path())
        .args(["serve", "--port", "0", "--data-dir", "data"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let first = lines.next().unwrap().unwrap();
    let addr = first.strip_prefix("listening on http://").unwrap().to_owned();
    let health = get(&addr, "/v1/health");
    assert!(health.starts_with("HTTP/1.1 200"), "{health}");
    assert!(health.contains("\"ok\":true"));

    let o = Command::new("kill").args(["-TERM", &child.id().to_string()]).status().unwrap();
    assert!(o.success());
    let deadline = std::time::Instant::now() + Duration::from_secs(10);
    let status = loop {
        if let Some(s) = child.try_wait().unwrap() {
            break s;
        }
        assert!(std::time::Instant::now() < deadline, "server did not stop");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert_eq!(status.code(), Some(0));
}

#[test]
fn serve_port_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = run(dir.path(), &["serve", "--port", &port]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot bind"));
}

#[test]
fn shipped_demo_cassette_replays() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("cassettes")).unwrap();
    std::fs::copy(format!("{REPO}/cassettes/demo.jsonl"), dir.path().join("cassettes/demo.jsonl")).unwrap();
    let script = "I have painful blisters on my penis that appeared after a new partner.\nYes\nWhat is the treatment for this?\nThank you, goodbye.\n";
    let o = run_stdin(dir.path(), &["chat", "--backend", "replay", "--data-dir", "data"], script);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("Session closed."));
    let s = sessions(&dir.path().join("data"));
    assert_eq!(s[0].turns.last().unwrap().state_after, StateId::Closing);
    assert!(s[0].turns.iter().all(|t| t.backend_error.is_none()));
}
