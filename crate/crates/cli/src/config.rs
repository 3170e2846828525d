//! Run configuration: built-in defaults, then an optional TOML file, then
//! command-line flags. Secrets are never read from the file; only the
//! names of the environment variables that hold them.

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use scam_agent::engine::{EngineConfig, TimingMode, DEFAULT_MAX_ACTIONS, DEFAULT_MAX_OBSERVATION_CHARS};
use scam_agent::eval::Pricing;
use scam_agent::gateway::{DEFAULT_MAX_CONTEXT_TOKENS, DEFAULT_TEMPERATURE};
use scam_agent::prompt::{PromptTemplate, ScamFeatureList};
use scam_agent::tools::live::LiveConfig;
use scam_agent::tools::Mode;
use scam_agent::verdict::{KeywordTable, SynonymTable};
use scam_agent::DEFAULT_USER_AGENT;
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_MODEL: &str = "gpt-4";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

/// Flags shared by every command. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// TOML config file
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// replay (default), live or record; live and record reach the network
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    #[arg(long = "model", global = true, value_name = "ID")]
    pub model_id: Option<String>,
    /// Full chat-completions URL
    #[arg(long, global = true, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Environment variable holding the model API key
    #[arg(long, global = true, value_name = "VAR")]
    pub api_key_env: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true, value_name = "TOKENS")]
    pub max_context_tokens: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub max_actions: Option<usize>,
    #[arg(long, global = true, value_name = "CHARS")]
    pub max_observation_chars: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub parallelism: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    pub fixtures: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub scripts: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    pub template: Option<PathBuf>,
    /// One scam feature per line, replacing the built-in list
    #[arg(long, global = true, value_name = "FILE")]
    pub features: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    pub keywords: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    pub synonyms: Option<PathBuf>,
    #[arg(long, short = 'o', global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub user_agent: Option<String>,
    /// Seconds allowed per model request
    #[arg(long, global = true, value_name = "SECS")]
    pub request_timeout: Option<u64>,
    /// Seconds allowed per page fetch
    #[arg(long, global = true, value_name = "SECS")]
    pub page_timeout: Option<u64>,
    #[arg(long, global = true, value_name = "ADDR")]
    pub resolver: Option<SocketAddr>,
    /// Minimum milliseconds between requests to one host or API
    #[arg(long, global = true, value_name = "MS")]
    pub rate_limit_ms: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    mode: Option<Mode>,
    model_id: Option<String>,
    endpoint: Option<String>,
    api_key_env: Option<String>,
    temperature: Option<f64>,
    max_context_tokens: Option<usize>,
    max_actions: Option<usize>,
    max_observation_chars: Option<usize>,
    parallelism: Option<usize>,
    fixtures: Option<PathBuf>,
    scripts: Option<PathBuf>,
    template: Option<PathBuf>,
    features: Option<PathBuf>,
    keywords: Option<PathBuf>,
    synonyms: Option<PathBuf>,
    output: Option<PathBuf>,
    user_agent: Option<String>,
    request_timeout: Option<u64>,
    page_timeout: Option<u64>,
    resolver: Option<SocketAddr>,
    rate_limit_ms: Option<u64>,
    #[serde(default)]
    pricing: BTreeMap<String, Pricing>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub model_id: String,
    pub endpoint: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub max_context_tokens: usize,
    pub max_actions: usize,
    pub max_observation_chars: usize,
    pub parallelism: usize,
    pub fixtures: Option<PathBuf>,
    pub scripts: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub user_agent: String,
    pub request_timeout: Duration,
    pub page_timeout: Duration,
    pub resolver: SocketAddr,
    pub rate_limit: Duration,
    pub pricing: BTreeMap<String, Pricing>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Replay,
            model_id: DEFAULT_MODEL.into(),
            endpoint: DEFAULT_ENDPOINT.into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_context_tokens: DEFAULT_MAX_CONTEXT_TOKENS,
            max_actions: DEFAULT_MAX_ACTIONS,
            max_observation_chars: DEFAULT_MAX_OBSERVATION_CHARS,
            parallelism: 4,
            fixtures: None,
            scripts: None,
            template: None,
            features: None,
            keywords: None,
            synonyms: None,
            output: None,
            user_agent: DEFAULT_USER_AGENT.into(),
            request_timeout: Duration::from_secs(120),
            page_timeout: Duration::from_secs(30),
            resolver: SocketAddr::from(([8, 8, 8, 8], 53)),
            rate_limit: Duration::from_secs(1),
            pricing: BTreeMap::new(),
        }
    }
}

fn relative_to(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Defaults, then `flags.config` if given, then the flags themselves.
    pub fn resolve(flags: &RunFlags) -> Result<Self, CliError> {
        let mut c = Self::default();
        if let Some(path) = &flags.config {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let file: FileConfig =
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let base = path.parent().unwrap_or(Path::new("."));
            c.apply_file(file, base, flags.mode)?;
        }
        c.apply_flags(flags.clone());
        c.validate()?;
        Ok(c)
    }

    fn apply_file(&mut self, f: FileConfig, base: &Path, flag_mode: Option<Mode>) -> Result<(), CliError> {
        match f.mode {
            Some(Mode::Replay) | None => {}
            Some(m) if flag_mode == Some(m) => {}
            Some(other) => {
                return Err(CliError::Config(format!(
                    "mode = \"{other}\" in a config file is not honoured; pass --mode {other} on the command line"
                )))
            }
        }
        let path = |p: Option<PathBuf>| p.map(|p| relative_to(base, p));
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { self.$field = v; } )* };
        }
        take!(model_id, endpoint, api_key_env, temperature, max_context_tokens, max_actions, max_observation_chars, parallelism, user_agent, resolver);
        macro_rules! take_path {
            ($($field:ident),*) => { $( if let Some(v) = path(f.$field) { self.$field = Some(v); } )* };
        }
        take_path!(fixtures, scripts, template, features, keywords, synonyms, output);
        if let Some(s) = f.request_timeout {
            self.request_timeout = Duration::from_secs(s);
        }
        if let Some(s) = f.page_timeout {
            self.page_timeout = Duration::from_secs(s);
        }
        if let Some(ms) = f.rate_limit_ms {
            self.rate_limit = Duration::from_millis(ms);
        }
        self.pricing.extend(f.pricing);
        Ok(())
    }

    fn apply_flags(&mut self, f: RunFlags) {
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { self.$field = v; } )* };
        }
        take!(mode, model_id, endpoint, api_key_env, temperature, max_context_tokens, max_actions, max_observation_chars, parallelism, user_agent, resolver);
        macro_rules! take_path {
            ($($field:ident),*) => { $( if f.$field.is_some() { self.$field = f.$field; } )* };
        }
        take_path!(fixtures, scripts, template, features, keywords, synonyms, output);
        if let Some(s) = f.request_timeout {
            self.request_timeout = Duration::from_secs(s);
        }
        if let Some(s) = f.page_timeout {
            self.page_timeout = Duration::from_secs(s);
        }
        if let Some(ms) = f.rate_limit_ms {
            self.rate_limit = Duration::from_millis(ms);
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must be between 0 and 2");
        }
        if self.max_actions == 0 {
            return bad("max_actions must be at least 1");
        }
        if self.max_observation_chars < 16 {
            return bad("max_observation_chars must be at least 16");
        }
        if self.max_context_tokens == 0 {
            return bad("max_context_tokens must be positive");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        Ok(())
    }

    /// Fixture directory; required outside live mode.
    pub fn fixtures_dir(&self) -> Result<&Path, CliError> {
        self.fixtures
            .as_deref()
            .ok_or_else(|| CliError::Config(format!("{} mode needs a fixture directory (--fixtures)", self.mode)))
    }

    pub fn scripts_dir(&self) -> Result<&Path, CliError> {
        self.scripts
            .as_deref()
            .ok_or_else(|| CliError::Config(format!("{} mode needs a script directory (--scripts)", self.mode)))
    }

    pub fn output_path(&self) -> Result<&Path, CliError> {
        self.output.as_deref().ok_or_else(|| CliError::Usage("this command needs --output".into()))
    }

    pub fn engine(&self) -> Result<EngineConfig, CliError> {
        let mut template = match &self.template {
            Some(p) => PromptTemplate::load(p).map_err(|e| CliError::Config(e.to_string()))?,
            None => PromptTemplate::default(),
        };
        if let Some(p) = &self.features {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let features = ScamFeatureList::from_lines(&text).map_err(|e| CliError::Config(e.to_string()))?;
            template = template.with_features(features);
        }
        let mut engine = EngineConfig::new(self.model_id.clone()).with_timing(match self.mode {
            Mode::Replay => TimingMode::Virtual,
            _ => TimingMode::Measured,
        });
        engine.template = template;
        engine.max_actions = self.max_actions;
        engine.max_observation_chars = self.max_observation_chars;
        engine.max_context_tokens = self.max_context_tokens;
        engine.temperature = self.temperature;
        Ok(engine)
    }

    pub fn keyword_table(&self) -> Result<KeywordTable, CliError> {
        match &self.keywords {
            Some(p) => KeywordTable::load(p).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(KeywordTable::default()),
        }
    }

    pub fn synonym_table(&self) -> Result<SynonymTable, CliError> {
        match &self.synonyms {
            Some(p) => SynonymTable::load(p).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(SynonymTable::default()),
        }
    }

    pub fn live(&self) -> LiveConfig {
        LiveConfig {
            user_agent: self.user_agent.clone(),
            page_timeout: self.page_timeout,
            resolver: self.resolver,
            ..LiveConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal::Decimal;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("c.toml");
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn defaults_match_the_documented_parameters() {
        let c = RunConfig::resolve(&RunFlags::default()).unwrap();
        assert_eq!(c.mode, Mode::Replay);
        assert_eq!(c.temperature, 0.7);
        assert_eq!(c.max_context_tokens, 128_000);
        assert_eq!(c.max_actions, 10);
        assert_eq!(c.user_agent, DEFAULT_USER_AGENT);
    }

    #[test]
    fn flags_override_file_and_paths_are_relative_to_it() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            dir.path(),
            "model_id = \"m1\"\nmax_actions = 5\nfixtures = \"fx\"\n[pricing.m1]\nprompt_per_1k = \"0.01\"\ncompletion_per_1k = \"0.03\"\n",
        );
        let flags = RunFlags { config: Some(path), max_actions: Some(7), ..Default::default() };
        let c = RunConfig::resolve(&flags).unwrap();
        assert_eq!(c.model_id, "m1");
        assert_eq!(c.max_actions, 7);
        assert_eq!(c.fixtures, Some(dir.path().join("fx")));
        assert_eq!(c.pricing["m1"].completion_per_1k, Decimal::new(3, 2));
    }

    #[test]
    fn live_mode_cannot_come_from_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "mode = \"live\"\n");
        let err = RunConfig::resolve(&RunFlags { config: Some(path.clone()), ..Default::default() }).unwrap_err();
        assert!(err.to_string().contains("--mode live"));
        let c = RunConfig::resolve(&RunFlags { config: Some(path), mode: Some(Mode::Live), ..Default::default() }).unwrap();
        assert_eq!(c.mode, Mode::Live);
    }

    #[test]
    fn unknown_keys_and_secrets_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "api_key = \"sk-123\"\n");
        assert!(RunConfig::resolve(&RunFlags { config: Some(path), ..Default::default() }).is_err());
    }

    #[test]
    fn out_of_range_values_are_config_errors() {
        let flags = RunFlags { temperature: Some(3.0), ..Default::default() };
        assert!(matches!(RunConfig::resolve(&flags), Err(CliError::Config(_))));
        let flags = RunFlags { max_actions: Some(0), ..Default::default() };
        assert!(matches!(RunConfig::resolve(&flags), Err(CliError::Config(_))));
    }
}
