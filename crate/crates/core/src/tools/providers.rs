//! Provider interfaces behind the tools, and the raw payloads they return.
//!
//! Payloads are what fixtures store. Observation bodies (including the
//! result caps) are always rendered from a payload, so live, cached and
//! replayed calls render identically.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchedPage {
    pub requested_url: String,
    pub final_url: String,
    pub status: u16,
    pub html: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchErrorKind {
    Timeout,
    Connect,
    Other,
}

impl fmt::Display for FetchErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FetchErrorKind::Timeout => "timeout",
            FetchErrorKind::Connect => "connect",
            FetchErrorKind::Other => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind}: {message}")]
pub struct FetchError {
    pub kind: FetchErrorKind,
    pub message: String,
}

impl FetchError {
    pub fn new(kind: FetchErrorKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{0}")]
pub struct ProviderError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocialPost {
    /// RFC 3339 creation time.
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocialResults {
    pub posts: Vec<SocialPost>,
    #[serde(default)]
    pub comments: Vec<SocialPost>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocialPlatform {
    XTwitter,
    Reddit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhoisResponse {
    pub server: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DnsRecordType {
    A,
    AAAA,
    NS,
    SOA,
    TXT,
    MX,
}

impl DnsRecordType {
    pub const ALL: [DnsRecordType; 6] =
        [DnsRecordType::A, DnsRecordType::AAAA, DnsRecordType::NS, DnsRecordType::SOA, DnsRecordType::TXT, DnsRecordType::MX];
}

impl fmt::Display for DnsRecordType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "records", rename_all = "snake_case")]
pub enum DnsAnswer {
    Records(Vec<String>),
    NoRecords,
    NxDomain,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnsSection {
    pub record_type: DnsRecordType,
    pub answer: DnsAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnsReport {
    pub resolver: String,
    pub sections: Vec<DnsSection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub issuer: String,
    pub not_before: String,
    pub not_after: String,
    pub sans: Vec<String>,
}

/// Raw provider result stored in fixtures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Page(FetchedPage),
    Search { hits: Vec<SearchHit> },
    XPosts { posts: Vec<SocialPost> },
    Reddit(SocialResults),
    Whois(WhoisResponse),
    Dns(DnsReport),
    Certificates { entries: Vec<CertEntry> },
}

pub trait PageFetcher: Send + Sync {
    fn fetch(&self, url: &Url) -> Result<FetchedPage, FetchError>;
}

pub trait SearchProvider: Send + Sync {
    fn search(&self, query: &str) -> Result<Vec<SearchHit>, ProviderError>;
}

pub trait SocialProvider: Send + Sync {
    fn search(&self, query: &str) -> Result<SocialResults, ProviderError>;
}

pub trait WhoisClient: Send + Sync {
    fn lookup(&self, domain: &str) -> Result<WhoisResponse, ProviderError>;
}

pub trait DnsClient: Send + Sync {
    /// Address of the resolver, reported in observations.
    fn resolver(&self) -> String;
    /// `Err` means the resolver could not be reached at all.
    fn query(&self, domain: &str, record_type: DnsRecordType) -> Result<DnsAnswer, ProviderError>;
}

pub trait CertProvider: Send + Sync {
    fn certificates(&self, domain: &str) -> Result<Vec<CertEntry>, ProviderError>;
}

#[derive(Clone)]
pub struct Providers {
    pub fetcher: Arc<dyn PageFetcher>,
    pub search: Arc<dyn SearchProvider>,
    pub x_twitter: Arc<dyn SocialProvider>,
    pub reddit: Arc<dyn SocialProvider>,
    pub whois: Arc<dyn WhoisClient>,
    pub dns: Arc<dyn DnsClient>,
    pub certificates: Arc<dyn CertProvider>,
}

impl Providers {
    /// Providers that refuse every call; used in replay mode.
    pub fn offline() -> Self {
        let offline = Arc::new(Offline);
        Self {
            fetcher: offline.clone(),
            search: offline.clone(),
            x_twitter: offline.clone(),
            reddit: offline.clone(),
            whois: offline.clone(),
            dns: offline.clone(),
            certificates: offline,
        }
    }
}

const OFFLINE: &str = "network access is disabled";

struct Offline;

impl PageFetcher for Offline {
    fn fetch(&self, _: &Url) -> Result<FetchedPage, FetchError> {
        Err(FetchError::new(FetchErrorKind::Other, OFFLINE))
    }
}

impl SearchProvider for Offline {
    fn search(&self, _: &str) -> Result<Vec<SearchHit>, ProviderError> {
        Err(ProviderError(OFFLINE.into()))
    }
}

impl SocialProvider for Offline {
    fn search(&self, _: &str) -> Result<SocialResults, ProviderError> {
        Err(ProviderError(OFFLINE.into()))
    }
}

impl WhoisClient for Offline {
    fn lookup(&self, _: &str) -> Result<WhoisResponse, ProviderError> {
        Err(ProviderError(OFFLINE.into()))
    }
}

impl DnsClient for Offline {
    fn resolver(&self) -> String {
        "offline".into()
    }

    fn query(&self, _: &str, _: DnsRecordType) -> Result<DnsAnswer, ProviderError> {
        Err(ProviderError(OFFLINE.into()))
    }
}

impl CertProvider for Offline {
    fn certificates(&self, _: &str) -> Result<Vec<CertEntry>, ProviderError> {
        Err(ProviderError(OFFLINE.into()))
    }
}
