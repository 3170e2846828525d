//! Wires config to a tool registry and a model backend for the chosen mode.

use std::sync::Arc;
use std::time::Instant;

use chrono::Utc;
use scam_agent::engine::{run_session, run_single_turn, AnalysisSession, EngineConfig, Strategy};
use scam_agent::gateway::{ChatBackend, HttpBackend, RecordingBackend, ScriptLibrary};
use scam_agent::tools::live::HttpPageFetcher;
use scam_agent::tools::{
    canonical_url, FetchError, FetchedPage, FixturePageFetcher, FixtureRecord, FixtureStore, Mode, PageFetcher,
    Payload, Providers, RateLimiter, ToolError, ToolKind, ToolRegistry,
};
use url::Url;

use crate::config::RunConfig;
use crate::CliError;

const TOOL_CREDENTIALS: [&str; 4] = ["TAVILY_API_KEY", "X_BEARER_TOKEN", "REDDIT_CLIENT_ID", "REDDIT_CLIENT_SECRET"];

enum Llm {
    Replay(ScriptLibrary),
    Live(Arc<HttpBackend>),
    Record(Arc<HttpBackend>, ScriptLibrary),
}

pub struct Runtime {
    engine: EngineConfig,
    registry: ToolRegistry,
    llm: Llm,
}

fn live_backend(config: &RunConfig) -> Result<Arc<HttpBackend>, CliError> {
    HttpBackend::from_env(&config.endpoint, &config.api_key_env, config.request_timeout)
        .map(Arc::new)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn warn_missing_tool_credentials() {
    for var in TOOL_CREDENTIALS {
        if std::env::var(var).map_or(true, |v| v.is_empty()) {
            tracing::warn!("{var} is not set; the tools that need it will report errors");
        }
    }
}

pub fn limiter(config: &RunConfig) -> RateLimiter {
    match config.mode {
        Mode::Replay => RateLimiter::unlimited(),
        _ => RateLimiter::new(config.rate_limit, config.rate_limit / 4),
    }
}

impl Runtime {
    pub fn new(config: &RunConfig) -> Result<Self, CliError> {
        let engine = config.engine()?;
        let registry_error = |e: scam_agent::tools::RegistryError| CliError::Config(e.to_string());
        let (registry, llm) = match config.mode {
            Mode::Replay => {
                let store = FixtureStore::new(config.fixtures_dir()?);
                (ToolRegistry::replay(store), Llm::Replay(ScriptLibrary::new(config.scripts_dir()?)))
            }
            Mode::Live => {
                let backend = live_backend(config)?;
                warn_missing_tool_credentials();
                let registry = ToolRegistry::builder(Mode::Live)
                    .providers(Providers::live(&config.live()))
                    .rate_limiter(limiter(config))
                    .build()
                    .map_err(registry_error)?;
                (registry, Llm::Live(backend))
            }
            Mode::Record => {
                let store = FixtureStore::new(config.fixtures_dir()?);
                let scripts = ScriptLibrary::new(config.scripts_dir()?);
                let backend = live_backend(config)?;
                warn_missing_tool_credentials();
                let registry = ToolRegistry::builder(Mode::Record)
                    .providers(Providers::live(&config.live()))
                    .fixtures(store)
                    .rate_limiter(limiter(config))
                    .build()
                    .map_err(registry_error)?;
                (registry, Llm::Record(backend, scripts))
            }
        };
        Ok(Self { engine, registry, llm })
    }

    fn run_with<B: ChatBackend + ?Sized>(&self, url: &str, strategy: Strategy, backend: &B) -> AnalysisSession {
        let outcome = match strategy {
            Strategy::React => run_session(url, backend, &self.registry, &self.engine),
            Strategy::SingleTurn => run_single_turn(url, backend, &self.registry, &self.engine),
        };
        outcome.unwrap_or_else(|e| *e.session)
    }

    /// Never fails: problems end up in the session's `error` field.
    pub fn analyze(&self, url: &str, strategy: Strategy) -> AnalysisSession {
        match &self.llm {
            Llm::Replay(library) => match library.backend_for(url) {
                Ok(backend) => self.run_with(url, strategy, &backend),
                Err(e) => AnalysisSession::failed(url, &self.engine.model_id, strategy, e.to_string()),
            },
            Llm::Live(backend) => self.run_with(url, strategy, backend.as_ref()),
            Llm::Record(backend, library) => {
                let recorder = RecordingBackend::new(backend.as_ref());
                let mut session = self.run_with(url, strategy, &recorder);
                if let Err(e) = library.save(url, &recorder.recorded()) {
                    session.warnings.push(format!("script not saved: {e}"));
                }
                session
            }
        }
    }
}

/// Fetches live and stores each outcome as an Access URL fixture.
struct RecordingFetcher {
    inner: HttpPageFetcher,
    store: FixtureStore,
}

impl PageFetcher for RecordingFetcher {
    fn fetch(&self, url: &Url) -> Result<FetchedPage, FetchError> {
        let started = Instant::now();
        let outcome = self.inner.fetch(url);
        let elapsed = started.elapsed();
        if let Ok(canonical) = canonical_url(url.as_str()) {
            let payload = outcome.clone().map(Payload::Page).map_err(ToolError::Fetch);
            let record = FixtureRecord::new(ToolKind::AccessUrl, canonical.as_str(), Utc::now(), elapsed, payload);
            if let Err(e) = self.store.save(&record) {
                tracing::warn!("fixture for {url} not saved: {e}");
            }
        }
        outcome
    }
}

/// Page fetcher for dataset accessibility checks.
pub fn page_fetcher(config: &RunConfig) -> Result<Box<dyn PageFetcher>, CliError> {
    Ok(match config.mode {
        Mode::Replay => Box::new(FixturePageFetcher::new(FixtureStore::new(config.fixtures_dir()?))),
        Mode::Live => Box::new(HttpPageFetcher::new(&config.user_agent, config.page_timeout)),
        Mode::Record => Box::new(RecordingFetcher {
            inner: HttpPageFetcher::new(&config.user_agent, config.page_timeout),
            store: FixtureStore::new(config.fixtures_dir()?),
        }),
    })
}
