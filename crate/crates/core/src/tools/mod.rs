//! The nine information-gathering tools behind one registry.
//!
//! Every remote tool goes through [`ToolRegistry::dispatch`], which
//! canonicalizes the input, serves repeated calls from a per-run cache,
//! and in replay mode answers only from the [`FixtureStore`]. The two
//! extraction tools are pure functions over pages stored in a per-session
//! [`PageStore`] by an earlier Access URL call.

mod fixtures;
pub mod html;
pub mod live;
mod netproto;
pub mod providers;
mod ratelimit;
mod render;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

pub use fixtures::{FixtureError, FixturePageFetcher, FixtureRecord, FixtureStore};
pub use html::Hyperlink;
pub use netproto::{DnsUdpClient, WhoisTcpClient};
pub use providers::*;
pub use ratelimit::RateLimiter;
pub use render::{
    redact_handles, render_payload, CERTIFICATE_LIMIT, REDDIT_COMMENT_LIMIT, REDDIT_POST_LIMIT, SEARCH_LIMIT,
    X_POST_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    AccessUrl,
    ExtractText,
    ExtractHyperlink,
    GetSearchResult,
    SearchXTwitter,
    SearchReddit,
    RetrieveWhois,
    RetrieveDnsRecord,
    RetrieveCertificate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgumentKind {
    Url,
    Domain,
    Query,
}

impl ToolKind {
    /// Default registration order.
    pub const ALL: [ToolKind; 9] = [
        ToolKind::AccessUrl,
        ToolKind::ExtractText,
        ToolKind::ExtractHyperlink,
        ToolKind::GetSearchResult,
        ToolKind::SearchXTwitter,
        ToolKind::SearchReddit,
        ToolKind::RetrieveWhois,
        ToolKind::RetrieveDnsRecord,
        ToolKind::RetrieveCertificate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToolKind::AccessUrl => "Access URL",
            ToolKind::ExtractText => "Extract Text",
            ToolKind::ExtractHyperlink => "Extract Hyperlink",
            ToolKind::GetSearchResult => "Get Search Result",
            ToolKind::SearchXTwitter => "Search X/Twitter",
            ToolKind::SearchReddit => "Search Reddit",
            ToolKind::RetrieveWhois => "Retrieve WHOIS",
            ToolKind::RetrieveDnsRecord => "Retrieve DNS Record",
            ToolKind::RetrieveCertificate => "Retrieve Certificate",
        }
    }

    /// File-name friendly identifier used for fixtures.
    pub fn slug(self) -> &'static str {
        match self {
            ToolKind::AccessUrl => "access_url",
            ToolKind::ExtractText => "extract_text",
            ToolKind::ExtractHyperlink => "extract_hyperlink",
            ToolKind::GetSearchResult => "web_search",
            ToolKind::SearchXTwitter => "x_search",
            ToolKind::SearchReddit => "reddit_search",
            ToolKind::RetrieveWhois => "whois",
            ToolKind::RetrieveDnsRecord => "dns",
            ToolKind::RetrieveCertificate => "certificate",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ToolKind::AccessUrl => "A tool that accesses a URL to obtain a status code. This tool requires a URL as an argument.",
            ToolKind::ExtractText => {
                "A tool that extracts text in the HTML. You must access a URL first before using this tool. \
                 This tool requires the URL as an argument."
            }
            ToolKind::ExtractHyperlink => {
                "A tool that extracts a-tag hyperlinks and texts in the HTML. You must access a URL first before \
                 using this tool. This tool requires the URL as an argument."
            }
            ToolKind::GetSearchResult => {
                "A tool to retrieve search results from a search engine. This tool requires a search query as an \
                 argument. You cannot use a URL as-is as a search query. Note that only the top 10 results will be \
                 retrieved."
            }
            ToolKind::SearchXTwitter => {
                "A tool to retrieve posts containing a keyword from X/Twitter. This tool requires a search query as \
                 an argument. You cannot use a URL as-is as a search query. Note that only the latest top 10 results \
                 will be retrieved."
            }
            ToolKind::SearchReddit => {
                "A tool to retrieve posts containing a keyword from Reddit. This tool requires a search query as an \
                 argument. You cannot use a URL as-is as a search query. Note that only the top five related posts \
                 and the top five associated comments will be retrieved."
            }
            ToolKind::RetrieveWhois => {
                "A tool to retrieve domain name information from WHOIS. This tool requires a domain name as an argument."
            }
            ToolKind::RetrieveDnsRecord => {
                "A tool to retrieve DNS records using the dig command. This tool requires a domain name as an argument."
            }
            ToolKind::RetrieveCertificate => {
                "A tool to retrieve certificate information from crt.sh. This tool requires a domain name as an \
                 argument. Note that only the latest top 5 results will be retrieved."
            }
        }
    }

    pub fn argument_kind(self) -> ArgumentKind {
        match self {
            ToolKind::AccessUrl | ToolKind::ExtractText | ToolKind::ExtractHyperlink => ArgumentKind::Url,
            ToolKind::GetSearchResult | ToolKind::SearchXTwitter | ToolKind::SearchReddit => ArgumentKind::Query,
            ToolKind::RetrieveWhois | ToolKind::RetrieveDnsRecord | ToolKind::RetrieveCertificate => {
                ArgumentKind::Domain
            }
        }
    }

    pub fn is_extraction(self) -> bool {
        matches!(self, ToolKind::ExtractText | ToolKind::ExtractHyperlink)
    }

    pub fn spec(self) -> ToolSpec {
        ToolSpec { name: self.name().to_string(), description: self.description().to_string(), argument_kind: self.argument_kind() }
    }

    /// Canonical form of `input`, used as the cache and fixture key.
    pub fn canonical_input(self, input: &str) -> Result<String, ToolError> {
        match self.argument_kind() {
            ArgumentKind::Url => canonical_url(input).map(|u| u.to_string()),
            ArgumentKind::Query => canonical_query(input),
            ArgumentKind::Domain => {
                let host = canonical_domain(input);
                match self {
                    ToolKind::RetrieveWhois => host
                        .and_then(|h| registrable_domain(&h))
                        .map_err(|e| ToolError::Lookup(e.to_string())),
                    _ => host,
                }
            }
        }
    }
}

impl fmt::Display for ToolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ToolKind {
    type Err = ToolError;

    /// Case-insensitive, ignoring surrounding quotes, brackets and spaces.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = strip_wrapping(s);
        ToolKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(wanted) || k.slug().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| ToolError::UnknownTool(wanted.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub argument_kind: ArgumentKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSource {
    Live,
    Cache,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub tool: String,
    pub input: String,
    pub body: String,
    pub fetched_at: DateTime<Utc>,
    pub source: ObservationSource,
    #[serde(with = "duration_ms", rename = "elapsed_ms")]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum ToolError {
    #[error("unknown tool '{0}'")]
    UnknownTool(String),
    #[error("no fixture recorded for {tool} with input '{input}'")]
    FixtureMiss { tool: String, input: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{0} has not been accessed. You must access the URL with Access URL first before using this tool.")]
    MustAccessFirst(String),
    #[error("the page has no visible text")]
    EmptyDocument,
    #[error("You cannot use a URL as-is as a search query. Use keywords instead.")]
    QueryIsBareUrl,
    #[error("could not fetch the page ({0})")]
    Fetch(FetchError),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("WHOIS lookup failed: {0}")]
    Lookup(String),
    #[error("DNS resolver unreachable: {0}")]
    ResolverUnreachable(String),
    #[error("fixture store error: {0}")]
    Store(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Live,
    Replay,
    Record,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(Mode::Live),
            "replay" => Ok(Mode::Replay),
            "record" => Ok(Mode::Record),
            other => Err(format!("unknown mode '{other}' (expected live, replay or record)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Live => "live",
            Mode::Replay => "replay",
            Mode::Record => "record",
        })
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("{0} mode needs a fixture store")]
    MissingFixtureStore(Mode),
    #[error("tool '{0}' registered twice")]
    DuplicateTool(String),
    #[error("no tools registered")]
    Empty,
}

#[derive(Debug, Clone)]
struct StoredPage {
    page: FetchedPage,
    fetched_at: DateTime<Utc>,
}

/// Pages fetched by Access URL during one session, keyed by the canonical
/// requested URL and by the final URL after redirects.
#[derive(Debug, Default, Clone)]
pub struct PageStore {
    pages: HashMap<String, StoredPage>,
}

impl PageStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    pub fn get(&self, url: &str) -> Option<&FetchedPage> {
        self.lookup(url).map(|s| &s.page)
    }

    fn lookup(&self, url: &str) -> Option<&StoredPage> {
        let key = canonical_url(url).ok()?.to_string();
        self.pages.get(&key)
    }

    fn insert(&mut self, stored: StoredPage) {
        for key in [&stored.page.requested_url, &stored.page.final_url] {
            if let Ok(url) = canonical_url(key) {
                self.pages.insert(url.to_string(), stored.clone());
            }
        }
    }
}

#[derive(Debug, Clone)]
struct CachedCall {
    outcome: Result<Payload, ToolError>,
    fetched_at: DateTime<Utc>,
    elapsed: Duration,
    origin: ObservationSource,
}

type CacheCell = Arc<OnceLock<CachedCall>>;

/// Tool registry shared by all sessions of a run.
pub struct ToolRegistry {
    kinds: Vec<ToolKind>,
    mode: Mode,
    providers: Providers,
    fixtures: Option<FixtureStore>,
    limiter: RateLimiter,
    cache: Mutex<HashMap<(ToolKind, String), CacheCell>>,
    live_calls: AtomicU64,
}

pub struct RegistryBuilder {
    kinds: Vec<ToolKind>,
    mode: Mode,
    providers: Option<Providers>,
    fixtures: Option<FixtureStore>,
    limiter: RateLimiter,
}

impl RegistryBuilder {
    pub fn tools(mut self, kinds: impl IntoIterator<Item = ToolKind>) -> Self {
        self.kinds = kinds.into_iter().collect();
        self
    }

    pub fn providers(mut self, providers: Providers) -> Self {
        self.providers = Some(providers);
        self
    }

    pub fn fixtures(mut self, store: FixtureStore) -> Self {
        self.fixtures = Some(store);
        self
    }

    pub fn rate_limiter(mut self, limiter: RateLimiter) -> Self {
        self.limiter = limiter;
        self
    }

    pub fn build(self) -> Result<ToolRegistry, RegistryError> {
        if self.kinds.is_empty() {
            return Err(RegistryError::Empty);
        }
        for (i, k) in self.kinds.iter().enumerate() {
            if self.kinds[..i].contains(k) {
                return Err(RegistryError::DuplicateTool(k.name().to_string()));
            }
        }
        if self.mode != Mode::Live && self.fixtures.is_none() {
            return Err(RegistryError::MissingFixtureStore(self.mode));
        }
        let providers = match self.mode {
            Mode::Replay => Providers::offline(),
            _ => self.providers.unwrap_or_else(Providers::offline),
        };
        Ok(ToolRegistry {
            kinds: self.kinds,
            mode: self.mode,
            providers,
            fixtures: self.fixtures,
            limiter: self.limiter,
            cache: Mutex::new(HashMap::new()),
            live_calls: AtomicU64::new(0),
        })
    }
}

impl ToolRegistry {
    pub fn builder(mode: Mode) -> RegistryBuilder {
        RegistryBuilder {
            kinds: ToolKind::ALL.to_vec(),
            mode,
            providers: None,
            fixtures: None,
            limiter: RateLimiter::default(),
        }
    }

    /// All nine tools served from `store` with no network access.
    pub fn replay(store: FixtureStore) -> Self {
        Self::builder(Mode::Replay).fixtures(store).build().expect("replay registry with fixture store")
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn kinds(&self) -> &[ToolKind] {
        &self.kinds
    }

    pub fn specs(&self) -> Vec<ToolSpec> {
        self.kinds.iter().map(|k| k.spec()).collect()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.kinds.iter().map(|k| k.name()).collect()
    }

    pub fn fixtures(&self) -> Option<&FixtureStore> {
        self.fixtures.as_ref()
    }

    /// Number of provider invocations made so far (cache misses outside
    /// replay mode). Always zero in replay mode.
    pub fn live_calls(&self) -> u64 {
        self.live_calls.load(Ordering::SeqCst)
    }

    /// Registered tool matching `name`, compared case-insensitively.
    pub fn resolve(&self, name: &str) -> Option<ToolKind> {
        ToolKind::from_str(name).ok().filter(|k| self.kinds.contains(k))
    }

    /// Runs `tool_name` on `input`. Access URL results are stored in `pages`
    /// for the extraction tools.
    pub fn dispatch(&self, tool_name: &str, input: &str, pages: &mut PageStore) -> Result<Observation, ToolError> {
        let kind = self.resolve(tool_name).ok_or_else(|| ToolError::UnknownTool(strip_wrapping(tool_name).to_string()))?;
        if kind.is_extraction() {
            return self.extract(kind, input, pages);
        }
        let canonical = kind.canonical_input(input)?;
        let (call, first) = self.cached(kind, &canonical);
        let payload = call.outcome?;
        let source = match (self.mode, first) {
            (Mode::Replay, _) => ObservationSource::Fixture,
            (_, true) => call.origin,
            (_, false) => ObservationSource::Cache,
        };
        if let Payload::Page(page) = &payload {
            pages.insert(StoredPage { page: page.clone(), fetched_at: call.fetched_at });
        }
        Ok(Observation {
            tool: kind.name().to_string(),
            input: canonical,
            body: render_payload(&payload),
            fetched_at: call.fetched_at,
            source,
            elapsed: if first { call.elapsed } else { Duration::ZERO },
        })
    }

    fn extract(&self, kind: ToolKind, input: &str, pages: &PageStore) -> Result<Observation, ToolError> {
        let url = canonical_url(input)?;
        let stored = pages.lookup(url.as_str()).ok_or_else(|| ToolError::MustAccessFirst(url.to_string()))?;
        let started = Instant::now();
        let body = match kind {
            ToolKind::ExtractText => {
                let blocks = html::text_blocks(&stored.page.html);
                if blocks.is_empty() {
                    return Err(ToolError::EmptyDocument);
                }
                blocks.join("\n")
            }
            _ => {
                let base = Url::parse(&stored.page.final_url).unwrap_or(url.clone());
                html::hyperlinks(&stored.page.html, &base).iter().map(|l| l.to_string()).collect::<Vec<_>>().join("\n")
            }
        };
        let source = match self.mode {
            Mode::Replay => ObservationSource::Fixture,
            _ => ObservationSource::Cache,
        };
        let elapsed = match self.mode {
            Mode::Replay => Duration::ZERO,
            _ => started.elapsed(),
        };
        Ok(Observation {
            tool: kind.name().to_string(),
            input: url.to_string(),
            body,
            fetched_at: stored.fetched_at,
            source,
            elapsed,
        })
    }

    /// At most one provider call per key: concurrent callers for the same
    /// key block on the same cell. The flag is true for the caller that
    /// filled it.
    fn cached(&self, kind: ToolKind, canonical: &str) -> (CachedCall, bool) {
        let cell = {
            let mut cache = self.cache.lock().expect("tool cache poisoned");
            cache.entry((kind, canonical.to_string())).or_default().clone()
        };
        let mut first = false;
        let call = cell.get_or_init(|| {
            first = true;
            self.invoke(kind, canonical)
        });
        (call.clone(), first)
    }

    fn invoke(&self, kind: ToolKind, canonical: &str) -> CachedCall {
        if self.mode == Mode::Replay {
            return self.replay_fixture(kind, canonical);
        }
        self.limiter.wait(&limiter_key(kind, canonical));
        self.live_calls.fetch_add(1, Ordering::SeqCst);
        let fetched_at = Utc::now();
        let started = Instant::now();
        let outcome = self.call_provider(kind, canonical);
        let elapsed = started.elapsed();
        tracing::debug!(tool = kind.name(), input = canonical, ok = outcome.is_ok(), "live tool call");
        let call = CachedCall { outcome, fetched_at, elapsed, origin: ObservationSource::Live };
        if self.mode == Mode::Record {
            if let Some(store) = &self.fixtures {
                let record = FixtureRecord::new(kind, canonical, call.fetched_at, call.elapsed, call.outcome.clone());
                if let Err(e) = store.save(&record) {
                    tracing::warn!(error = %e, tool = kind.name(), "failed to write fixture");
                }
            }
        }
        call
    }

    fn replay_fixture(&self, kind: ToolKind, canonical: &str) -> CachedCall {
        let miss = || ToolError::FixtureMiss { tool: kind.name().to_string(), input: canonical.to_string() };
        let store = self.fixtures.as_ref();
        match store.map(|s| s.load(kind, canonical)) {
            Some(Ok(Some(record))) => CachedCall {
                outcome: record.outcome(),
                fetched_at: record.fetched_at,
                elapsed: Duration::from_millis(record.elapsed_ms),
                origin: ObservationSource::Fixture,
            },
            Some(Err(e)) => CachedCall {
                outcome: Err(ToolError::Store(e.to_string())),
                fetched_at: DateTime::<Utc>::UNIX_EPOCH,
                elapsed: Duration::ZERO,
                origin: ObservationSource::Fixture,
            },
            _ => CachedCall {
                outcome: Err(miss()),
                fetched_at: DateTime::<Utc>::UNIX_EPOCH,
                elapsed: Duration::ZERO,
                origin: ObservationSource::Fixture,
            },
        }
    }

    fn call_provider(&self, kind: ToolKind, canonical: &str) -> Result<Payload, ToolError> {
        let p = &self.providers;
        let provider = |e: ProviderError| ToolError::Provider(e.0);
        match kind {
            ToolKind::AccessUrl => {
                let url = Url::parse(canonical).map_err(|e| ToolError::InvalidInput(e.to_string()))?;
                p.fetcher.fetch(&url).map(Payload::Page).map_err(ToolError::Fetch)
            }
            ToolKind::GetSearchResult => p.search.search(canonical).map(|hits| Payload::Search { hits }).map_err(provider),
            ToolKind::SearchXTwitter => p.x_twitter.search(canonical).map(|r| Payload::XPosts { posts: r.posts }).map_err(provider),
            ToolKind::SearchReddit => p.reddit.search(canonical).map(Payload::Reddit).map_err(provider),
            ToolKind::RetrieveWhois => {
                p.whois.lookup(canonical).map(Payload::Whois).map_err(|e| ToolError::Lookup(e.0))
            }
            ToolKind::RetrieveDnsRecord => {
                let mut sections = Vec::new();
                let mut unreachable = Vec::new();
                for record_type in DnsRecordType::ALL {
                    let answer = match p.dns.query(canonical, record_type) {
                        Ok(answer) => answer,
                        Err(e) => {
                            unreachable.push(e.0.clone());
                            DnsAnswer::Failed(e.0)
                        }
                    };
                    sections.push(DnsSection { record_type, answer });
                }
                if unreachable.len() == DnsRecordType::ALL.len() {
                    return Err(ToolError::ResolverUnreachable(unreachable.swap_remove(0)));
                }
                Ok(Payload::Dns(DnsReport { resolver: p.dns.resolver(), sections }))
            }
            ToolKind::RetrieveCertificate => {
                p.certificates.certificates(canonical).map(|entries| Payload::Certificates { entries }).map_err(provider)
            }
            ToolKind::ExtractText | ToolKind::ExtractHyperlink => {
                unreachable!("extraction tools are served from the page store")
            }
        }
    }
}

fn limiter_key(kind: ToolKind, canonical: &str) -> String {
    match kind {
        ToolKind::AccessUrl => {
            let host = Url::parse(canonical).ok().and_then(|u| u.host_str().map(str::to_string)).unwrap_or_default();
            format!("fetch:{host}")
        }
        other => other.slug().to_string(),
    }
}

/// Trims whitespace and one layer of quotes, backticks or brackets that
/// models like to wrap around arguments.
pub fn strip_wrapping(input: &str) -> &str {
    let mut s = input.trim();
    loop {
        let before = s;
        for (open, close) in [('"', '"'), ('\'', '\''), ('`', '`'), ('<', '>'), ('[', ']'), ('(', ')')] {
            if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
                s = s[1..s.len() - 1].trim();
            }
        }
        if s == before {
            return s;
        }
    }
}

/// Absolute http(s) URL with lowercase host and no trailing dot on the
/// host. Percent-encoding is left as given.
pub fn canonical_url(input: &str) -> Result<Url, ToolError> {
    let raw = strip_wrapping(input);
    let mut url = Url::parse(raw).map_err(|e| ToolError::InvalidInput(format!("'{raw}' is not a valid URL ({e})")))?;
    if !matches!(url.scheme(), "http" | "https") {
        return Err(ToolError::InvalidInput(format!("'{raw}' is not an http(s) URL")));
    }
    let host = url.host_str().ok_or_else(|| ToolError::InvalidInput(format!("'{raw}' has no host")))?.to_string();
    if let Some(trimmed) = host.strip_suffix('.') {
        url.set_host(Some(trimmed)).map_err(|e| ToolError::InvalidInput(e.to_string()))?;
    }
    Ok(url)
}

/// Lowercase ASCII host name. URLs are reduced to their host.
pub fn canonical_domain(input: &str) -> Result<String, ToolError> {
    let raw = strip_wrapping(input);
    let invalid = || ToolError::InvalidInput(format!("'{raw}' is not a valid domain name"));
    let host = if raw.contains("://") {
        Url::parse(raw).ok().and_then(|u| u.host_str().map(str::to_string)).ok_or_else(invalid)?
    } else {
        let host = raw.split(['/', '?', '#']).next().unwrap_or_default();
        let host = host.rsplit_once('@').map_or(host, |(_, h)| h);
        let host = host.split(':').next().unwrap_or_default();
        if host.is_empty() || host.chars().any(|c| c.is_whitespace()) {
            return Err(invalid());
        }
        Url::parse(&format!("http://{host}/")).ok().and_then(|u| u.host_str().map(str::to_string)).ok_or_else(invalid)?
    };
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    let labels: Vec<&str> = host.split('.').collect();
    let valid = labels.len() >= 2
        && labels.iter().all(|l| {
            !l.is_empty()
                && l.len() <= 63
                && !l.starts_with('-')
                && !l.ends_with('-')
                && l.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
        })
        && !labels.last().unwrap().chars().all(|c| c.is_ascii_digit());
    if valid {
        Ok(host)
    } else {
        Err(invalid())
    }
}

/// Registrable domain (public suffix plus one label) of `host`.
pub fn registrable_domain(host: &str) -> Result<String, ToolError> {
    psl::domain_str(host)
        .map(str::to_string)
        .ok_or_else(|| ToolError::InvalidInput(format!("'{host}' has no registrable domain")))
}

/// Trimmed query with internal whitespace collapsed. Rejects queries that
/// are just a URL.
pub fn canonical_query(input: &str) -> Result<String, ToolError> {
    let query = strip_wrapping(input).split_whitespace().collect::<Vec<_>>().join(" ");
    if query.is_empty() {
        return Err(ToolError::InvalidInput("empty search query".into()));
    }
    if is_bare_url(&query) {
        return Err(ToolError::QueryIsBareUrl);
    }
    Ok(query)
}

fn is_bare_url(query: &str) -> bool {
    if query.contains(' ') {
        return false;
    }
    if query.to_ascii_lowercase().starts_with("www.") {
        return true;
    }
    Url::parse(query).is_ok_and(|u| matches!(u.scheme(), "http" | "https") && u.host_str().is_some())
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}
