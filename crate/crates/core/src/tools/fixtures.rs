//! Record/replay store: one JSON file per (tool, canonical input).

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use url::Url;

use super::providers::{FetchError, FetchErrorKind, FetchedPage, PageFetcher, Payload};
use super::render::render_payload;
use super::{canonical_url, ToolError, ToolKind};
use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: serde_json::Error },
    #[error("{path}: fixture is keyed to {found} but was looked up as {expected}")]
    KeyMismatch { path: PathBuf, expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub schema_version: u32,
    pub tool: String,
    pub input: String,
    pub fetched_at: DateTime<Utc>,
    #[serde(default)]
    pub elapsed_ms: u64,
    /// Rendered observation body (or error text) at record time.
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ToolError>,
}

impl FixtureRecord {
    pub fn new(
        kind: ToolKind,
        canonical_input: &str,
        fetched_at: DateTime<Utc>,
        elapsed: Duration,
        outcome: Result<Payload, ToolError>,
    ) -> Self {
        let (body, payload, error) = match outcome {
            Ok(p) => (render_payload(&p), Some(p), None),
            Err(e) => (format!("Error: {e}"), None, Some(e)),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            tool: kind.name().to_string(),
            input: canonical_input.to_string(),
            fetched_at,
            elapsed_ms: elapsed.as_millis() as u64,
            body,
            payload,
            error,
        }
    }

    pub fn outcome(&self) -> Result<Payload, ToolError> {
        match (&self.payload, &self.error) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(e)) => Err(e.clone()),
            (None, None) => Err(ToolError::Store(format!("fixture for {} '{}' has neither payload nor error", self.tool, self.input))),
        }
    }
}

#[derive(Debug)]
pub struct FixtureStore {
    root: PathBuf,
    write_lock: Mutex<()>,
}

impl Clone for FixtureStore {
    fn clone(&self) -> Self {
        Self::new(self.root.clone())
    }
}

impl FixtureStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), write_lock: Mutex::new(()) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// `<root>/<slug>-<first 16 hex of sha256(slug \n input)>.json`
    pub fn path_for(&self, kind: ToolKind, canonical_input: &str) -> PathBuf {
        let digest = Sha256::digest(format!("{}\n{}", kind.slug(), canonical_input).as_bytes());
        self.root.join(format!("{}-{}.json", kind.slug(), &hex::encode(digest)[..16]))
    }

    pub fn load(&self, kind: ToolKind, canonical_input: &str) -> Result<Option<FixtureRecord>, FixtureError> {
        let path = self.path_for(kind, canonical_input);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(FixtureError::Io { path, source }),
        };
        let record: FixtureRecord =
            serde_json::from_str(&text).map_err(|source| FixtureError::Format { path: path.clone(), source })?;
        if record.input != canonical_input || !record.tool.eq_ignore_ascii_case(kind.name()) {
            return Err(FixtureError::KeyMismatch {
                path,
                expected: format!("{} '{}'", kind.name(), canonical_input),
                found: format!("{} '{}'", record.tool, record.input),
            });
        }
        Ok(Some(record))
    }

    /// Writes `record` atomically (temp file then rename).
    pub fn save(&self, record: &FixtureRecord) -> Result<PathBuf, FixtureError> {
        let kind: ToolKind = record.tool.parse().map_err(|e: ToolError| FixtureError::Io {
            path: self.root.clone(),
            source: io::Error::new(io::ErrorKind::InvalidInput, e.to_string()),
        })?;
        let path = self.path_for(kind, &record.input);
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| FixtureError::Io { path, source }
        };
        let _guard = self.write_lock.lock().expect("fixture write lock poisoned");
        fs::create_dir_all(&self.root).map_err(io_err(&self.root))?;
        let json = serde_json::to_string_pretty(record)
            .map_err(|source| FixtureError::Format { path: path.clone(), source })?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, json + "\n").map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(path)
    }

    /// Every record under the root, sorted by (tool, input).
    pub fn list(&self) -> Result<Vec<FixtureRecord>, FixtureError> {
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(source) => return Err(FixtureError::Io { path: self.root.clone(), source }),
        };
        let mut records = Vec::new();
        for entry in entries {
            let path = entry.map_err(|source| FixtureError::Io { path: self.root.clone(), source })?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&path).map_err(|source| FixtureError::Io { path: path.clone(), source })?;
            let record = serde_json::from_str(&text).map_err(|source| FixtureError::Format { path, source })?;
            records.push(record);
        }
        records.sort_by(|a: &FixtureRecord, b| (&a.tool, &a.input).cmp(&(&b.tool, &b.input)));
        Ok(records)
    }
}

/// Serves recorded Access URL fixtures through the [`PageFetcher`]
/// interface, so dataset checks can run offline.
pub struct FixturePageFetcher {
    store: FixtureStore,
}

impl FixturePageFetcher {
    pub fn new(store: FixtureStore) -> Self {
        Self { store }
    }
}

impl PageFetcher for FixturePageFetcher {
    fn fetch(&self, url: &Url) -> Result<FetchedPage, FetchError> {
        let other = |m: String| FetchError::new(FetchErrorKind::Other, m);
        let canonical = canonical_url(url.as_str()).map_err(|e| other(e.to_string()))?;
        match self.store.load(ToolKind::AccessUrl, canonical.as_str()) {
            Ok(Some(record)) => match record.outcome() {
                Ok(Payload::Page(page)) => Ok(page),
                Ok(_) => Err(other(format!("fixture for {canonical} is not a page"))),
                Err(ToolError::Fetch(e)) => Err(e),
                Err(e) => Err(other(e.to_string())),
            },
            Ok(None) => Err(other(format!("no fixture recorded for {canonical}"))),
            Err(e) => Err(other(e.to_string())),
        }
    }
}
