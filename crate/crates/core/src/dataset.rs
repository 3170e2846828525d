//! Evaluation dataset construction: candidate ingestion, toplist filter,
//! accessibility check, annotation merge and balanced sampling, in that
//! order. Every stage only adds exclusions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::tools::{canonical_url, registrable_domain, FetchErrorKind, PageFetcher, RateLimiter};
use crate::verdict::ScamType;
use crate::SCHEMA_VERSION;

pub const DEFAULT_TOPLIST_CUTOFF: u32 = 100_000;
pub const REASON_TOPLIST: &str = "toplist";
pub const REASON_INACCESSIBLE: &str = "inaccessible";
pub const REASON_TIMEOUT: &str = "inaccessible:timeout";
pub const REASON_MANUAL: &str = "manual";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Scam,
    Legitimate,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Scam => "scam",
            Label::Legitimate => "legitimate",
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scam" => Ok(Label::Scam),
            "legitimate" | "legit" => Ok(Label::Legitimate),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    De,
    Ja,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::De => "de",
            Language::Ja => "ja",
        }
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" => Ok(Language::En),
            "de" => Ok(Language::De),
            "ja" => Ok(Language::Ja),
            other => Err(format!("unknown language `{other}`")),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One labelled URL. Legitimate entries may carry the scam type whose
/// counterpart they are; it only matters for sampling cells and slicing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub url: String,
    pub label: Label,
    #[serde(default)]
    pub scam_type: Option<ScamType>,
    pub language: Language,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub accessible: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded_reason: Option<String>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl DatasetEntry {
    pub fn new(url: impl Into<String>, label: Label, scam_type: Option<ScamType>, language: Language) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            url: url.into(),
            label,
            scam_type,
            language,
            source: String::new(),
            accessible: None,
            excluded_reason: None,
        }
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn is_excluded(&self) -> bool {
        self.excluded_reason.is_some()
    }

    pub fn cell(&self) -> Cell {
        Cell { label: self.label, scam_type: self.scam_type, language: self.language }
    }

    fn exclude(&mut self, reason: &str) {
        if self.excluded_reason.is_none() {
            self.excluded_reason = Some(reason.to_string());
        }
    }
}

/// Sampling stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub label: Label,
    pub scam_type: Option<ScamType>,
    pub language: Language,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = self.scam_type.map_or("-", ScamType::as_str);
        write!(f, "{}/{}/{}", self.label, kind, self.language)
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path} line {line}: {message}")]
    Row { path: String, line: usize, message: String },
    #[error("{url} is labelled both scam and legitimate")]
    ConflictingLabels { url: String },
    #[error("toplist: {0}")]
    TopList(String),
    #[error("annotations reference URLs not in the dataset: {}", urls.join(", "))]
    UnknownUrlInAnnotations { urls: Vec<String> },
    #[error("cell {cell} has {count} retained entries, {needed} needed")]
    InsufficientCell { cell: String, count: usize, needed: usize },
}

fn io_error(path: &Path, e: impl fmt::Display) -> DatasetError {
    DatasetError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Deserialize)]
struct CandidateRow {
    url: String,
    label: String,
    #[serde(default)]
    scam_type: Option<String>,
    language: String,
    #[serde(default)]
    source: Option<String>,
}

impl CandidateRow {
    fn into_entry(self) -> Result<DatasetEntry, String> {
        let url = canonical_url(&self.url).map_err(|e| e.to_string())?;
        let label = Label::from_str(&self.label)?;
        let scam_type = match self.scam_type.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(raw) => Some(ScamType::from_str(raw)?),
        };
        if label == Label::Scam && scam_type.is_none() {
            return Err("scam entries need a scam_type".into());
        }
        let language = Language::from_str(&self.language)?;
        Ok(DatasetEntry::new(url.as_str(), label, scam_type, language).with_source(self.source.unwrap_or_default()))
    }
}

/// Reads candidates from CSV (header `url,label,scam_type,language,source`)
/// or JSONL. JSONL is detected by a leading `{`. Duplicate URLs with the
/// same label are dropped; with different labels they are an error.
pub fn read_candidates(path: &Path) -> Result<Vec<DatasetEntry>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let row_error =
        |line: usize, message: String| DatasetError::Row { path: path.display().to_string(), line, message };
    let mut entries = Vec::new();
    if text.trim_start().starts_with('{') {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: CandidateRow = serde_json::from_str(line).map_err(|e| row_error(i + 1, e.to_string()))?;
            entries.push(row.into_entry().map_err(|m| row_error(i + 1, m))?);
        }
    } else {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        for (i, row) in reader.deserialize::<CandidateRow>().enumerate() {
            let row = row.map_err(|e| row_error(i + 2, e.to_string()))?;
            entries.push(row.into_entry().map_err(|m| row_error(i + 2, m))?);
        }
    }
    dedupe(entries)
}

fn dedupe(entries: Vec<DatasetEntry>) -> Result<Vec<DatasetEntry>, DatasetError> {
    let mut seen: HashMap<String, Label> = HashMap::new();
    let mut out = Vec::with_capacity(entries.len());
    for entry in entries {
        match seen.get(&entry.url) {
            Some(label) if *label != entry.label => return Err(DatasetError::ConflictingLabels { url: entry.url }),
            Some(_) => continue,
            None => {
                seen.insert(entry.url.clone(), entry.label);
                out.push(entry);
            }
        }
    }
    Ok(out)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetEntry>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(line).map_err(|e| DatasetError::Row {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_dataset(path: &Path, entries: &[DatasetEntry]) -> Result<(), DatasetError> {
    let mut out = Vec::new();
    for entry in entries {
        serde_json::to_writer(&mut out, entry).map_err(|e| io_error(path, e))?;
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| io_error(path, e))?;
    file.write_all(&out).map_err(|e| io_error(path, e))
}

/// Popularity ranking, domain → rank.
#[derive(Debug, Clone, Default)]
pub struct TopList {
    ranks: HashMap<String, u32>,
}

impl TopList {
    /// Ranks must be exactly 1..=N, each once.
    pub fn new(ranked: impl IntoIterator<Item = (u32, String)>) -> Result<Self, DatasetError> {
        let mut ranks = HashMap::new();
        let mut seen = HashSet::new();
        for (rank, domain) in ranked {
            if rank == 0 || !seen.insert(rank) {
                return Err(DatasetError::TopList(format!("rank {rank} is zero or repeated")));
            }
            let domain = domain.trim().trim_end_matches('.').to_ascii_lowercase();
            ranks.entry(domain).or_insert(rank);
        }
        let n = seen.len() as u32;
        if let Some(max) = seen.iter().max() {
            if *max != n {
                return Err(DatasetError::TopList(format!("ranks are not contiguous: {n} entries, highest rank {max}")));
            }
        }
        Ok(Self { ranks })
    }

    /// `rank,domain` rows without a header.
    pub fn from_csv(text: &str) -> Result<Self, DatasetError> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (rank, domain) = line
                .split_once(',')
                .ok_or_else(|| DatasetError::TopList(format!("line {}: expected rank,domain", i + 1)))?;
            let rank = rank
                .trim()
                .parse()
                .map_err(|_| DatasetError::TopList(format!("line {}: bad rank `{rank}`", i + 1)))?;
            rows.push((rank, domain.to_string()));
        }
        Self::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        Self::from_csv(&fs::read_to_string(path).map_err(|e| io_error(path, e))?)
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Best rank of the URL's host or its registrable domain.
    pub fn rank_of(&self, url: &str) -> Option<u32> {
        let host = Url::parse(url).ok()?.host_str()?.trim_end_matches('.').to_ascii_lowercase();
        let by_host = self.ranks.get(&host).copied();
        let by_domain = registrable_domain(&host).ok().and_then(|d| self.ranks.get(&d).copied());
        by_host.into_iter().chain(by_domain).min()
    }
}

pub fn filter_toplist(mut entries: Vec<DatasetEntry>, toplist: &TopList, cutoff: u32) -> Vec<DatasetEntry> {
    for entry in entries.iter_mut().filter(|e| !e.is_excluded()) {
        if toplist.rank_of(&entry.url).is_some_and(|r| r <= cutoff) {
            entry.exclude(REASON_TOPLIST);
        }
    }
    entries
}

/// Fetches every retained entry once. Only a final status of 200 keeps it.
/// Per-host pacing comes from `limiter` (keys `fetch:<host>`).
pub fn check_accessibility(
    mut entries: Vec<DatasetEntry>,
    fetcher: &dyn PageFetcher,
    limiter: &RateLimiter,
    parallelism: usize,
) -> Vec<DatasetEntry> {
    let todo: Vec<usize> = (0..entries.len()).filter(|i| !entries[*i].is_excluded()).collect();
    let urls: Vec<String> = todo.iter().map(|i| entries[*i].url.clone()).collect();
    let results: Mutex<Vec<Option<Result<(), &'static str>>>> = Mutex::new(vec![None; todo.len()]);
    let next = AtomicUsize::new(0);
    thread::scope(|scope| {
        for _ in 0..parallelism.max(1).min(urls.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(url) = urls.get(k) else { break };
                let outcome = probe(url, fetcher, limiter);
                tracing::debug!(url = %url, ok = outcome.is_ok(), "accessibility");
                results.lock().expect("results poisoned")[k] = Some(outcome);
            });
        }
    });
    for (k, outcome) in results.into_inner().expect("results poisoned").into_iter().enumerate() {
        let entry = &mut entries[todo[k]];
        match outcome.expect("every URL probed") {
            Ok(()) => entry.accessible = Some(true),
            Err(reason) => {
                entry.accessible = Some(false);
                entry.exclude(reason);
            }
        }
    }
    entries
}

fn probe(url: &str, fetcher: &dyn PageFetcher, limiter: &RateLimiter) -> Result<(), &'static str> {
    let url = Url::parse(url).map_err(|_| REASON_INACCESSIBLE)?;
    limiter.wait(&format!("fetch:{}", url.host_str().unwrap_or_default()));
    match fetcher.fetch(&url) {
        Ok(page) if page.status == 200 => Ok(()),
        Ok(_) => Err(REASON_INACCESSIBLE),
        Err(e) if e.kind == FetchErrorKind::Timeout => Err(REASON_TIMEOUT),
        Err(_) => Err(REASON_INACCESSIBLE),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationVerdict {
    Keep,
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub url: String,
    pub verdict: AnnotationVerdict,
    #[serde(default)]
    pub scam_type: Option<ScamType>,
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row: Annotation = serde_json::from_str(line).map_err(|e| DatasetError::Row {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Ok(url) = canonical_url(&row.url) {
            row.url = url.to_string();
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Applies manual review results. `keep` may retype an entry but never
/// brings back an excluded one. Nothing is changed if any row names an
/// unknown URL.
pub fn merge_annotations(
    mut entries: Vec<DatasetEntry>,
    annotations: &[Annotation],
) -> Result<Vec<DatasetEntry>, DatasetError> {
    let index: HashMap<&str, usize> = entries.iter().enumerate().map(|(i, e)| (e.url.as_str(), i)).collect();
    let unknown: Vec<String> =
        annotations.iter().filter(|a| !index.contains_key(a.url.as_str())).map(|a| a.url.clone()).collect();
    if !unknown.is_empty() {
        return Err(DatasetError::UnknownUrlInAnnotations { urls: unknown });
    }
    let positions: Vec<usize> = annotations.iter().map(|a| index[a.url.as_str()]).collect();
    for (a, i) in annotations.iter().zip(positions) {
        let entry = &mut entries[i];
        match a.verdict {
            AnnotationVerdict::Exclude => entry.exclude(REASON_MANUAL),
            AnnotationVerdict::Keep => {
                if a.scam_type.is_some() {
                    entry.scam_type = a.scam_type;
                }
            }
        }
    }
    Ok(entries)
}

/// Draws exactly `per_cell` retained entries from every cell seen in
/// `entries` (excluded entries included when listing cells, so a cell
/// emptied by filtering is reported rather than silently dropped).
pub fn balanced_sample(entries: &[DatasetEntry], per_cell: usize, seed: u64) -> Result<Vec<DatasetEntry>, DatasetError> {
    let mut cells: BTreeMap<Cell, Vec<&DatasetEntry>> = BTreeMap::new();
    for entry in entries {
        let pool = cells.entry(entry.cell()).or_default();
        if !entry.is_excluded() {
            pool.push(entry);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cells.len() * per_cell);
    for (cell, mut pool) in cells {
        if pool.len() < per_cell {
            return Err(DatasetError::InsufficientCell { cell: cell.to_string(), count: pool.len(), needed: per_cell });
        }
        pool.shuffle(&mut rng);
        out.extend(pool.into_iter().take(per_cell).cloned());
    }
    Ok(out)
}
