//! Network-backed providers. None of these are used in replay mode.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use reqwest::blocking::{Client, Response};
use reqwest::redirect::Policy;
use serde::Deserialize;
use serde_json::Value;
use url::Url;

use super::netproto::{DnsUdpClient, WhoisTcpClient};
use super::providers::*;
use super::render::redact_handles;
use crate::DEFAULT_USER_AGENT;

/// Where a provider credential comes from.
#[derive(Debug, Clone)]
pub enum Credential {
    Env(String),
    Value(String),
}

impl Credential {
    fn get(&self) -> Result<String, ProviderError> {
        match self {
            Credential::Value(v) => Ok(v.clone()),
            Credential::Env(var) => std::env::var(var)
                .ok()
                .filter(|v| !v.is_empty())
                .ok_or_else(|| ProviderError(format!("credential {var} is not set"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub user_agent: String,
    pub page_timeout: Duration,
    pub api_timeout: Duration,
    pub resolver: SocketAddr,
    pub dns_timeout: Duration,
    pub whois_server: String,
    pub whois_timeout: Duration,
    pub search_endpoint: String,
    pub x_endpoint: String,
    pub reddit_auth_endpoint: String,
    pub reddit_api_base: String,
    pub crtsh_endpoint: String,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            user_agent: DEFAULT_USER_AGENT.to_string(),
            page_timeout: Duration::from_secs(30),
            api_timeout: Duration::from_secs(30),
            resolver: SocketAddr::from(([8, 8, 8, 8], 53)),
            dns_timeout: Duration::from_secs(5),
            whois_server: "whois.iana.org".to_string(),
            whois_timeout: Duration::from_secs(15),
            search_endpoint: "https://api.tavily.com/search".to_string(),
            x_endpoint: "https://api.twitter.com/2/tweets/search/recent".to_string(),
            reddit_auth_endpoint: "https://www.reddit.com/api/v1/access_token".to_string(),
            reddit_api_base: "https://oauth.reddit.com".to_string(),
            crtsh_endpoint: "https://crt.sh/".to_string(),
        }
    }
}

impl Providers {
    /// Live adapters. Credentials are read from `TAVILY_API_KEY`,
    /// `X_BEARER_TOKEN`, `REDDIT_CLIENT_ID` and `REDDIT_CLIENT_SECRET` when
    /// a call is made, so a missing key only affects that tool.
    pub fn live(config: &LiveConfig) -> Self {
        let api = api_client(&config.user_agent, config.api_timeout);
        Self {
            fetcher: Arc::new(HttpPageFetcher::new(&config.user_agent, config.page_timeout)),
            search: Arc::new(TavilySearch::new(api.clone(), &config.search_endpoint, Credential::Env("TAVILY_API_KEY".into()))),
            x_twitter: Arc::new(XRecentSearch::new(api.clone(), &config.x_endpoint, Credential::Env("X_BEARER_TOKEN".into()))),
            reddit: Arc::new(RedditSearch::new(
                api.clone(),
                &config.reddit_auth_endpoint,
                &config.reddit_api_base,
                Credential::Env("REDDIT_CLIENT_ID".into()),
                Credential::Env("REDDIT_CLIENT_SECRET".into()),
            )),
            whois: Arc::new(WhoisTcpClient::new(config.whois_server.clone(), 43, config.whois_timeout)),
            dns: Arc::new(DnsUdpClient::new(config.resolver, config.dns_timeout)),
            certificates: Arc::new(CrtSh::new(api, &config.crtsh_endpoint)),
        }
    }
}

pub fn api_client(user_agent: &str, timeout: Duration) -> Client {
    Client::builder().user_agent(user_agent).timeout(timeout).build().expect("static reqwest configuration")
}

fn checked(response: reqwest::Result<Response>) -> Result<Response, ProviderError> {
    let response = response.map_err(|e| ProviderError(e.to_string()))?;
    let status = response.status();
    if status.is_success() {
        return Ok(response);
    }
    let body: String = response.text().unwrap_or_default().chars().take(200).collect();
    Err(ProviderError(format!("HTTP {}: {}", status.as_u16(), body)))
}

fn json<T: for<'de> Deserialize<'de>>(response: Response) -> Result<T, ProviderError> {
    response.json().map_err(|e| ProviderError(format!("unexpected response: {e}")))
}

/// Plain HTTP fetch with redirect following and a fixed desktop
/// user-agent. JavaScript is not executed.
pub struct HttpPageFetcher {
    client: Client,
}

impl HttpPageFetcher {
    pub fn new(user_agent: &str, timeout: Duration) -> Self {
        let client = Client::builder()
            .user_agent(user_agent)
            .timeout(timeout)
            .redirect(Policy::limited(10))
            .build()
            .expect("static reqwest configuration");
        Self { client }
    }
}

impl PageFetcher for HttpPageFetcher {
    fn fetch(&self, url: &Url) -> Result<FetchedPage, FetchError> {
        let classify = |e: reqwest::Error| {
            let kind = if e.is_timeout() {
                FetchErrorKind::Timeout
            } else if e.is_connect() {
                FetchErrorKind::Connect
            } else {
                FetchErrorKind::Other
            };
            FetchError::new(kind, e.to_string())
        };
        let response = self.client.get(url.clone()).send().map_err(classify)?;
        let final_url = response.url().to_string();
        let status = response.status().as_u16();
        let bytes = response.bytes().map_err(classify)?;
        Ok(FetchedPage {
            requested_url: url.to_string(),
            final_url,
            status,
            html: String::from_utf8_lossy(&bytes).into_owned(),
        })
    }
}

/// Tavily search API.
pub struct TavilySearch {
    client: Client,
    endpoint: String,
    key: Credential,
}

impl TavilySearch {
    pub fn new(client: Client, endpoint: &str, key: Credential) -> Self {
        Self { client, endpoint: endpoint.to_string(), key }
    }
}

#[derive(Deserialize)]
struct TavilyResponse {
    #[serde(default)]
    results: Vec<TavilyHit>,
}

#[derive(Deserialize)]
struct TavilyHit {
    url: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    content: String,
}

impl SearchProvider for TavilySearch {
    fn search(&self, query: &str) -> Result<Vec<SearchHit>, ProviderError> {
        let key = self.key.get()?;
        let body = serde_json::json!({ "query": query, "max_results": 10, "api_key": key });
        let response = checked(self.client.post(&self.endpoint).bearer_auth(&key).json(&body).send())?;
        let parsed: TavilyResponse = json(response)?;
        Ok(parsed.results.into_iter().map(|h| SearchHit { url: h.url, title: h.title, summary: h.content }).collect())
    }
}

/// X API v2 recent search.
pub struct XRecentSearch {
    client: Client,
    endpoint: String,
    token: Credential,
}

impl XRecentSearch {
    pub fn new(client: Client, endpoint: &str, token: Credential) -> Self {
        Self { client, endpoint: endpoint.to_string(), token }
    }
}

#[derive(Deserialize)]
struct XResponse {
    #[serde(default)]
    data: Vec<XPost>,
}

#[derive(Deserialize)]
struct XPost {
    text: String,
    #[serde(default)]
    created_at: String,
}

impl SocialProvider for XRecentSearch {
    fn search(&self, query: &str) -> Result<SocialResults, ProviderError> {
        let token = self.token.get()?;
        let request = self
            .client
            .get(&self.endpoint)
            .bearer_auth(token)
            .query(&[("query", query), ("max_results", "10"), ("tweet.fields", "created_at")]);
        let parsed: XResponse = json(checked(request.send())?)?;
        let posts = parsed
            .data
            .into_iter()
            .map(|p| SocialPost { timestamp: p.created_at, title: None, text: redact_handles(&p.text) })
            .collect();
        Ok(SocialResults { posts, comments: Vec::new() })
    }
}

/// Reddit search using an application-only OAuth token.
pub struct RedditSearch {
    client: Client,
    auth_endpoint: String,
    api_base: String,
    client_id: Credential,
    client_secret: Credential,
    token: Mutex<Option<String>>,
}

impl RedditSearch {
    pub fn new(client: Client, auth_endpoint: &str, api_base: &str, client_id: Credential, client_secret: Credential) -> Self {
        Self {
            client,
            auth_endpoint: auth_endpoint.to_string(),
            api_base: api_base.trim_end_matches('/').to_string(),
            client_id,
            client_secret,
            token: Mutex::new(None),
        }
    }

    fn token(&self) -> Result<String, ProviderError> {
        let mut cached = self.token.lock().expect("reddit token lock poisoned");
        if let Some(t) = cached.as_ref() {
            return Ok(t.clone());
        }
        let id = self.client_id.get()?;
        let secret = self.client_secret.get()?;
        let response = checked(
            self.client
                .post(&self.auth_endpoint)
                .basic_auth(id, Some(secret))
                .form(&[("grant_type", "client_credentials")])
                .send(),
        )?;
        let body: Value = json(response)?;
        let token = body["access_token"]
            .as_str()
            .ok_or_else(|| ProviderError("token response without access_token".into()))?
            .to_string();
        *cached = Some(token.clone());
        Ok(token)
    }

    fn listing(&self, path: &str, params: &[(&str, &str)]) -> Result<Value, ProviderError> {
        let token = self.token()?;
        let url = format!("{}{}", self.api_base, path);
        json(checked(self.client.get(url).bearer_auth(token).query(params).send())?)
    }
}

fn reddit_time(created_utc: &Value) -> String {
    created_utc
        .as_f64()
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs as i64, 0))
        .map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
        .unwrap_or_default()
}

impl SocialProvider for RedditSearch {
    fn search(&self, query: &str) -> Result<SocialResults, ProviderError> {
        let found = self.listing("/search", &[("q", query), ("limit", "5"), ("sort", "relevance"), ("type", "link")])?;
        let mut results = SocialResults::default();
        let mut ids = Vec::new();
        for child in found["data"]["children"].as_array().into_iter().flatten().take(5) {
            let d = &child["data"];
            results.posts.push(SocialPost {
                timestamp: reddit_time(&d["created_utc"]),
                title: d["title"].as_str().map(redact_handles),
                text: redact_handles(d["selftext"].as_str().unwrap_or_default()),
            });
            if let Some(id) = d["id"].as_str() {
                ids.push(id.to_string());
            }
        }
        for id in ids {
            if results.comments.len() >= 5 {
                break;
            }
            let thread = self.listing(&format!("/comments/{id}"), &[("limit", "5"), ("sort", "top"), ("depth", "1")])?;
            let comments = thread.get(1).map(|l| &l["data"]["children"]);
            for c in comments.and_then(Value::as_array).into_iter().flatten() {
                if results.comments.len() >= 5 {
                    break;
                }
                if c["kind"] == "t1" {
                    results.comments.push(SocialPost {
                        timestamp: reddit_time(&c["data"]["created_utc"]),
                        title: None,
                        text: redact_handles(c["data"]["body"].as_str().unwrap_or_default()),
                    });
                }
            }
        }
        Ok(results)
    }
}

/// Certificate Transparency search on crt.sh.
pub struct CrtSh {
    client: Client,
    endpoint: String,
}

impl CrtSh {
    pub fn new(client: Client, endpoint: &str) -> Self {
        Self { client, endpoint: endpoint.to_string() }
    }
}

#[derive(Deserialize)]
struct CrtShEntry {
    #[serde(default)]
    id: Option<u64>,
    #[serde(default)]
    issuer_name: String,
    #[serde(default)]
    not_before: String,
    #[serde(default)]
    not_after: String,
    #[serde(default)]
    name_value: String,
}

impl CertProvider for CrtSh {
    fn certificates(&self, domain: &str) -> Result<Vec<CertEntry>, ProviderError> {
        let response = checked(self.client.get(&self.endpoint).query(&[("q", domain), ("output", "json")]).send())?;
        let entries: Vec<CrtShEntry> = json(response)?;
        // crt.sh lists a precertificate and its final certificate separately.
        let mut seen = HashSet::new();
        Ok(entries
            .into_iter()
            .filter(|e| seen.insert((e.issuer_name.clone(), e.not_before.clone(), e.not_after.clone(), e.name_value.clone())))
            .map(|e| CertEntry {
                id: e.id,
                issuer: e.issuer_name,
                not_before: e.not_before,
                not_after: e.not_after,
                sans: e.name_value.lines().map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect(),
            })
            .collect())
    }
}
