use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use otiz_core::llm::{LiveConfig, DEFAULT_MODEL_ID};

use crate::CliError;

pub const DEFAULT_CONFIG_FILE: &str = "otiz.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    Mock,
    Replay,
    Live,
}

impl fmt::Display for BackendMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendMode::Mock => "mock",
            BackendMode::Replay => "replay",
            BackendMode::Live => "live",
        })
    }
}

impl FromStr for BackendMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mock" => Ok(BackendMode::Mock),
            "replay" => Ok(BackendMode::Replay),
            "live" => Ok(BackendMode::Live),
            other => Err(format!("unknown backend mode {other:?} (expected mock, replay or live)")),
        }
    }
}

/// Settings as they appear in the config file; every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    backend_mode: Option<BackendMode>,
    data_dir: Option<PathBuf>,
    host: Option<String>,
    port: Option<u16>,
    kb_path: Option<PathBuf>,
    dfa_path: Option<PathBuf>,
    corpus_path: Option<PathBuf>,
    prompts_dir: Option<PathBuf>,
    cassette_dir: Option<PathBuf>,
    cassette: Option<String>,
    seed: Option<u64>,
    model_id: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub backend_mode: BackendMode,
    pub data_dir: PathBuf,
    pub host: String,
    pub port: u16,
    pub kb_path: Option<PathBuf>,
    pub dfa_path: Option<PathBuf>,
    pub corpus_path: Option<PathBuf>,
    pub prompts_dir: Option<PathBuf>,
    pub cassette_dir: PathBuf,
    pub cassette: String,
    pub seed: u64,
    pub model_id: String,
    pub live: LiveConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            backend_mode: BackendMode::Mock,
            data_dir: PathBuf::from("otiz-data"),
            host: "127.0.0.1".to_owned(),
            port: 8080,
            kb_path: None,
            dfa_path: None,
            corpus_path: None,
            prompts_dir: None,
            cassette_dir: PathBuf::from("cassettes"),
            cassette: "demo".to_owned(),
            seed: 0,
            model_id: DEFAULT_MODEL_ID.to_owned(),
            live: LiveConfig::default(),
        }
    }
}

/// Command-line values that take precedence over file and environment.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub backend_mode: Option<BackendMode>,
    pub data_dir: Option<PathBuf>,
    pub kb_path: Option<PathBuf>,
    pub dfa_path: Option<PathBuf>,
    pub corpus_path: Option<PathBuf>,
    pub cassette: Option<String>,
    pub seed: Option<u64>,
}

fn env_parse<T: FromStr>(key: &str) -> Result<Option<T>, CliError>
where
    T::Err: fmt::Display,
{
    match std::env::var(key) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| CliError::Data(format!("{key}: {e}"))),
        _ => Ok(None),
    }
}

impl CliConfig {
    /// Layering: defaults, then the config file, then `OTIZ_*` variables,
    /// then command-line flags. An explicit `--config` must exist; the
    /// default `./otiz.toml` is read only if present.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => Some(read_file(p)?),
            None if Path::new(DEFAULT_CONFIG_FILE).is_file() => Some(read_file(Path::new(DEFAULT_CONFIG_FILE))?),
            None => None,
        };
        let mut cfg = Self::default();
        if let Some(f) = file {
            cfg.apply_file(f);
        }
        cfg.apply_env()?;
        cfg.apply_overrides(overrides);
        Ok(cfg)
    }

    fn apply_file(&mut self, f: FileConfig) {
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { self.$field = v; } )* };
        }
        take!(backend_mode, data_dir, host, port, cassette_dir, cassette, seed, model_id);
        self.kb_path = f.kb_path.or(self.kb_path.take());
        self.dfa_path = f.dfa_path.or(self.dfa_path.take());
        self.corpus_path = f.corpus_path.or(self.corpus_path.take());
        self.prompts_dir = f.prompts_dir.or(self.prompts_dir.take());
    }

    fn apply_env(&mut self) -> Result<(), CliError> {
        if let Some(v) = env_parse("OTIZ_BACKEND_MODE")? {
            self.backend_mode = v;
        }
        if let Some(v) = env_parse::<String>("OTIZ_DATA_DIR")? {
            self.data_dir = v.into();
        }
        if let Some(v) = env_parse("OTIZ_PORT")? {
            self.port = v;
        }
        if let Some(v) = env_parse::<String>("OTIZ_KB_PATH")? {
            self.kb_path = Some(v.into());
        }
        if let Some(v) = env_parse::<String>("OTIZ_DFA_PATH")? {
            self.dfa_path = Some(v.into());
        }
        if let Some(v) = env_parse("OTIZ_SEED")? {
            self.seed = v;
        }
        if let Some(v) = env_parse("OTIZ_MODEL_ID")? {
            self.model_id = v;
        }
        self.live = LiveConfig::from_env();
        Ok(())
    }

    fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(v) = o.backend_mode {
            self.backend_mode = v;
        }
        if let Some(v) = &o.data_dir {
            self.data_dir = v.clone();
        }
        if let Some(v) = &o.kb_path {
            self.kb_path = Some(v.clone());
        }
        if let Some(v) = &o.dfa_path {
            self.dfa_path = Some(v.clone());
        }
        if let Some(v) = &o.corpus_path {
            self.corpus_path = Some(v.clone());
        }
        if let Some(v) = &o.cassette {
            self.cassette = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
    }

    /// Live mode needs provider credentials; mock and replay need none.
    pub fn check(&self) -> Result<(), CliError> {
        if self.backend_mode == BackendMode::Live && self.live.api_key.is_none() {
            return Err(CliError::Data(
                "live backend requires credentials: set OTIZ_LLM_API_KEY".to_owned(),
            ));
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
