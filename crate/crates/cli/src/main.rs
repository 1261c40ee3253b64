mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{BackendMode, CliConfig, Overrides};
use otiz_core::eval::Criterion;

#[derive(Debug)]
pub enum CliError {
    /// Bad input, failed validation or a runtime failure.
    Data(String),
    /// The request cannot be satisfied under its constraints.
    Infeasible(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Infeasible(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Data(m) | CliError::Infeasible(m) => f.write_str(m),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "otiz", version, about = "Otiz STI counseling engine and evaluation toolkit")]
struct Cli {
    /// Config file (defaults to ./otiz.toml when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendMode>,
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    kb: Option<PathBuf>,
    #[arg(long, global = true)]
    dfa: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Cassette name under the cassette directory, for replay mode.
    #[arg(long, global = true)]
    cassette: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Interactive terminal chat.
    Chat(ChatArgs),
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        host: Option<String>,
    },
    /// Check the DFA, the knowledge base and the prompt corpus.
    Validate,
    /// Knowledge base tools.
    Kb {
        #[command(subcommand)]
        command: KbCommand,
    },
    /// Dialogue automaton tools.
    Dfa {
        #[command(subcommand)]
        command: DfaCommand,
    },
    /// Evaluation workflow.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Session store maintenance.
    Store {
        #[command(subcommand)]
        command: StoreCommand,
    },
}

#[derive(Debug, Args)]
struct ChatArgs {
    /// Also record backend exchanges to this cassette name.
    #[arg(long)]
    record: Option<String>,
}

#[derive(Debug, Subcommand)]
enum KbCommand {
    Lint,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GraphFormat {
    Dot,
    Json,
}

#[derive(Debug, Subcommand)]
enum DfaCommand {
    Export {
        #[arg(long, value_enum, default_value = "dot")]
        format: GraphFormat,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Assign prompts to evaluators.
    Assign {
        /// Number of evaluators, named E01, E02, ...
        #[arg(long, conflicts_with = "evaluator_file", required_unless_present = "evaluator_file")]
        evaluators: Option<usize>,
        /// File with one evaluator id per line.
        #[arg(long)]
        evaluator_file: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        per_prompt: usize,
        #[arg(long, default_value_t = 3)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: ReportFormat,
    },
    /// Run every corpus prompt through the engine with a scripted patient.
    Simulate {
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
    },
    /// Descriptive statistics, agreement, signed-rank test and themes.
    Stats {
        /// Records file (defaults to <data_dir>/eval/records.jsonl).
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
        /// Criteria left out of the agreement count.
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<Criterion>,
    },
}

#[derive(Debug, Subcommand)]
enum StoreCommand {
    /// Replay every stored session through the DFA and report mismatches.
    Check,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        backend_mode: cli.backend,
        data_dir: cli.data_dir,
        kb_path: cli.kb,
        dfa_path: cli.dfa,
        corpus_path: cli.corpus,
        cassette: cli.cassette,
        seed: cli.seed,
    };
    let mut cfg = CliConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Chat(args) => commands::chat(&cfg, args.record.as_deref()),
        Command::Serve { port, host } => {
            if let Some(p) = port {
                cfg.port = p;
            }
            if let Some(h) = host {
                cfg.host = h;
            }
            commands::serve(&cfg)
        }
        Command::Validate => commands::validate(&cfg),
        Command::Kb { command: KbCommand::Lint } => commands::kb_lint(&cfg),
        Command::Dfa {
            command: DfaCommand::Export { format },
        } => commands::dfa_export(&cfg, matches!(format, GraphFormat::Json)),
        Command::Eval { command } => match command {
            EvalCommand::Assign {
                evaluators,
                evaluator_file,
                per_prompt,
                cap,
                out,
                format,
            } => commands::eval_assign(
                &cfg,
                evaluators,
                evaluator_file.as_deref(),
                per_prompt,
                cap,
                out.as_deref(),
                format == ReportFormat::Json,
            ),
            EvalCommand::Simulate { format } => commands::eval_simulate(&cfg, format == ReportFormat::Json),
            EvalCommand::Stats {
                records,
                format,
                exclude,
            } => commands::eval_stats(&cfg, records.as_deref(), format == ReportFormat::Json, &exclude),
        },
        Command::Store {
            command: StoreCommand::Check,
        } => commands::store_check(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
