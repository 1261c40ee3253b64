use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use otiz_core::dfa::{export_graph, validate_dfa, DfaDefinition};
use otiz_core::eval::{
    build_assignment, check_records, parse_records, simulate, stats_report, verify_assignment, Codebook, Corpus,
    Criterion, EvalError,
};
use otiz_core::kb::{lint_kb, load_kb, KnowledgeBase};
use otiz_core::llm::{ChatBackend, LiveBackend, MockBackend, RecordingBackend, ReplayBackend};
use otiz_core::prompt::PromptLibrary;
use otiz_core::session::{check_store, SessionError, SessionManager};
use otiz_core::{Engine, EngineConfig};
use otiz_server::AppState;

use crate::config::{BackendMode, CliConfig};
use crate::CliError;

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_kb_from(cfg: &CliConfig) -> Result<KnowledgeBase, CliError> {
    match &cfg.kb_path {
        Some(p) => load_kb(&read(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => Ok(KnowledgeBase::bundled()),
    }
}

fn load_dfa_from(cfg: &CliConfig) -> Result<DfaDefinition, CliError> {
    match &cfg.dfa_path {
        Some(p) => DfaDefinition::from_json(&read(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => Ok(DfaDefinition::bundled()),
    }
}

fn load_corpus_from(cfg: &CliConfig) -> Result<Corpus, CliError> {
    match &cfg.corpus_path {
        Some(p) => Corpus::from_json(&read(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => Ok(Corpus::bundled()),
    }
}

fn backend(cfg: &CliConfig) -> Result<Arc<dyn ChatBackend>, CliError> {
    cfg.check()?;
    Ok(match cfg.backend_mode {
        BackendMode::Mock => Arc::new(MockBackend::bundled()),
        BackendMode::Replay => {
            let path = cfg.cassette_dir.join(format!("{}.jsonl", cfg.cassette));
            Arc::new(ReplayBackend::open(&path).map_err(data_err)?)
        }
        BackendMode::Live => Arc::new(LiveBackend::new(cfg.live.clone())),
    })
}

/// Loads and checks every artifact the engine depends on.
fn engine(cfg: &CliConfig) -> Result<Engine, CliError> {
    let kb = load_kb_from(cfg)?;
    let dfa = load_dfa_from(cfg)?;
    let report = validate_dfa(&dfa);
    if !report.ok {
        return Err(CliError::Data(report.to_string()));
    }
    let prompts = match &cfg.prompts_dir {
        Some(dir) => PromptLibrary::load_dir(dir).map_err(data_err)?,
        None => PromptLibrary::bundled(),
    };
    let mut config = EngineConfig::default();
    config.completion.model_id = cfg.model_id.clone();
    Ok(Engine {
        dfa: Arc::new(dfa),
        kb: Arc::new(kb),
        prompts: Arc::new(prompts),
        backend: backend(cfg)?,
        config,
    })
}

fn print_suggestions(out: &mut impl Write, suggestions: &[String]) -> std::io::Result<()> {
    for (i, s) in suggestions.iter().enumerate() {
        writeln!(out, "  {}. {s}", i + 1)?;
    }
    Ok(())
}

pub fn chat(cfg: &CliConfig, record: Option<&str>) -> Result<(), CliError> {
    let mut engine = engine(cfg)?;
    if let Some(name) = record {
        let path = cfg.cassette_dir.join(format!("{name}.jsonl"));
        engine.backend = Arc::new(RecordingBackend::create(&path, engine.backend.clone()).map_err(data_err)?);
    }
    let manager = SessionManager::open(engine, &cfg.data_dir).map_err(data_err)?;
    let session = manager.create_session().map_err(data_err)?;
    let id = session.id.clone();

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let io = |e: std::io::Error| CliError::Data(e.to_string());
    writeln!(out, "Session {id}. Type a message, a suggestion number, or /quit.").map_err(io)?;
    let mut suggestions: Vec<String> = manager
        .suggestions(&id)
        .map_err(data_err)?
        .into_iter()
        .map(|s| s.text)
        .collect();
    print_suggestions(&mut out, &suggestions).map_err(io)?;

    for line in std::io::stdin().lock().lines() {
        let line = line.map_err(io)?;
        let input = line.trim();
        if input.is_empty() {
            continue;
        }
        if input == "/quit" {
            break;
        }
        let text = match input.parse::<usize>() {
            Ok(n) if (1..=suggestions.len()).contains(&n) => {
                let picked = suggestions[n - 1].clone();
                writeln!(out, "> {picked}").map_err(io)?;
                picked
            }
            _ => input.to_owned(),
        };
        match manager.post_message(&id, &text) {
            Ok(r) => {
                writeln!(out, "[{}] {}", r.state_after, r.reply).map_err(io)?;
                suggestions = r.suggestions.into_iter().map(|s| s.text).collect();
                if manager.engine().dfa.is_terminal(r.state_after) {
                    writeln!(out, "Session closed.").map_err(io)?;
                    break;
                }
                print_suggestions(&mut out, &suggestions).map_err(io)?;
            }
            Err(SessionError::SessionClosed) => {
                writeln!(out, "Session closed.").map_err(io)?;
                break;
            }
            Err(SessionError::Validation(m)) => writeln!(out, "({m})").map_err(io)?,
            Err(e) => return Err(data_err(e)),
        }
    }
    let path = cfg.data_dir.join("sessions").join(format!("{id}.jsonl"));
    writeln!(out, "Transcript saved to {}", path.display()).map_err(io)?;
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        () = ctrl_c => {}
        () = term => {}
    }
}

pub fn serve(cfg: &CliConfig) -> Result<(), CliError> {
    let engine = engine(cfg)?;
    let corpus = load_corpus_from(cfg)?;
    let manager = SessionManager::open(engine, &cfg.data_dir).map_err(data_err)?;
    let state = AppState::new(manager, corpus, Codebook::bundled(), &cfg.data_dir).map_err(CliError::Data)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(data_err)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((cfg.host.as_str(), cfg.port))
            .await
            .map_err(|e| CliError::Data(format!("cannot bind {}:{}: {e}", cfg.host, cfg.port)))?;
        let addr = listener.local_addr().map_err(data_err)?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        otiz_server::serve(listener, state, shutdown_signal()).await.map_err(data_err)
    })?;
    println!("shut down");
    Ok(())
}

pub fn validate(cfg: &CliConfig) -> Result<(), CliError> {
    let mut failed = false;
    let dfa = load_dfa_from(cfg)?;
    let report = validate_dfa(&dfa);
    println!("{report}");
    failed |= !report.ok;

    let kb = load_kb_from(cfg)?;
    let lint = lint_kb(&kb);
    if lint.ok() {
        println!("KB ok ({} conditions)", kb.conditions().len());
    } else {
        failed = true;
        println!("KB has {} problem(s):", lint.problems.len());
        for p in &lint.problems {
            println!("  {p}");
        }
    }

    let corpus = load_corpus_from(cfg)?;
    let shape = corpus.check_shape(&kb);
    if shape.is_empty() {
        println!("Corpus ok ({} prompts)", corpus.prompts.len());
    } else {
        failed = true;
        println!("Corpus has {} problem(s):", shape.len());
        for p in &shape {
            println!("  {p}");
        }
    }
    if failed {
        Err(CliError::Data("validation failed".to_owned()))
    } else {
        Ok(())
    }
}

pub fn kb_lint(cfg: &CliConfig) -> Result<(), CliError> {
    let kb = load_kb_from(cfg)?;
    let lint = lint_kb(&kb);
    for p in &lint.problems {
        println!("{p}");
    }
    if lint.ok() {
        println!("KB ok ({} conditions, {} features)", kb.conditions().len(), kb.ontology().len());
        Ok(())
    } else {
        Err(CliError::Data(format!("{} lint problem(s)", lint.problems.len())))
    }
}

pub fn dfa_export(cfg: &CliConfig, json: bool) -> Result<(), CliError> {
    let dfa = load_dfa_from(cfg)?;
    if json {
        println!("{}", dfa.to_json());
    } else {
        print!("{}", export_graph(&dfa));
    }
    Ok(())
}

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::Infeasible(_) => CliError::Infeasible(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

pub fn eval_assign(
    cfg: &CliConfig,
    count: Option<usize>,
    file: Option<&Path>,
    per_prompt: usize,
    cap: usize,
    out: Option<&Path>,
    json: bool,
) -> Result<(), CliError> {
    let evaluators: Vec<String> = match (count, file) {
        (_, Some(path)) => read(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect(),
        (Some(n), None) => (1..=n).map(|i| format!("E{i:02}")).collect(),
        (None, None) => return Err(CliError::Data("no evaluators given".to_owned())),
    };
    let prompts = load_corpus_from(cfg)?.prompt_ids();
    let plan = build_assignment(&prompts, &evaluators, per_prompt, cap, cfg.seed).map_err(eval_err)?;
    verify_assignment(&plan, &prompts, &evaluators, per_prompt, cap).map_err(|p| CliError::Data(p.join("; ")))?;
    let text = if json {
        serde_json::to_string_pretty(&plan).map_err(data_err)? + "\n"
    } else {
        let mut s = String::from("evaluator\tprompt\n");
        for a in &plan.assignments {
            s.push_str(&format!("{}\t{}\n", a.evaluator_id, a.prompt_id));
        }
        s
    };
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            println!("wrote {} assignments to {}", plan.assignments.len(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn eval_simulate(cfg: &CliConfig, json: bool) -> Result<(), CliError> {
    let engine = engine(cfg)?;
    let corpus = load_corpus_from(cfg)?;
    let report = simulate(&engine, &corpus, cfg.seed).map_err(data_err)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(data_err)?);
        return Ok(());
    }
    println!("seed {}", report.seed);
    for c in &report.cases {
        println!(
            "{}  {:<24} {:<4} top2: {:<45} questions: {}  final: {}",
            c.prompt_id,
            c.condition_id,
            if c.hit { "hit" } else { "miss" },
            c.top2.join(", "),
            c.questions_asked,
            c.final_state
        );
    }
    println!();
    for (cond, hits) in &report.hits_by_condition {
        let total = report.cases.iter().filter(|c| &c.condition_id == cond).count();
        println!("{cond}: {hits}/{total}");
    }
    println!("STI top-2 hit rate: {:.3}", report.sti_hit_rate);
    println!("non-STI top-2 hit rate: {:.3}", report.non_sti_hit_rate);
    Ok(())
}

pub fn eval_stats(cfg: &CliConfig, records: Option<&Path>, json: bool, exclude: &[Criterion]) -> Result<(), CliError> {
    let path = records.map_or_else(|| cfg.data_dir.join("eval").join("records.jsonl"), Path::to_path_buf);
    let records = parse_records(&read(&path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let corpus = load_corpus_from(cfg)?;
    check_records(&records, &corpus).map_err(eval_err)?;
    let kb = load_kb_from(cfg)?;
    let report = stats_report(&records, &corpus, &kb, &Codebook::bundled(), exclude).map_err(eval_err)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(data_err)?);
    } else {
        print!("{}", report.render_table());
    }
    Ok(())
}

pub fn store_check(cfg: &CliConfig) -> Result<(), CliError> {
    let dfa = load_dfa_from(cfg)?;
    let report = check_store(&cfg.data_dir, &dfa).map_err(data_err)?;
    println!("{} session(s), {} turn(s)", report.sessions, report.turns);
    for p in &report.problems {
        println!("  {p}");
    }
    if report.ok() {
        println!("store ok");
        Ok(())
    } else {
        Err(CliError::Data(format!("{} problem(s) in store", report.problems.len())))
    }
}
