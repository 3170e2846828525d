use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::{estimate_tokens, ChatBackend, ChatRequest, ChatResponse, GatewayError};

/// Replays canned completions in order, one per call.
///
/// Token counts are estimated from the request and the canned text, and the
/// reported latency is a fixed per-call value, so identical scripts and
/// request sequences give identical responses.
#[derive(Debug)]
pub struct ScriptedBackend {
    script: Vec<String>,
    cursor: Mutex<usize>,
    latency: Duration,
}

impl ScriptedBackend {
    pub fn new<I, S>(script: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            script: script.into_iter().map(Into::into).collect(),
            cursor: Mutex::new(0),
            latency: Duration::ZERO,
        }
    }

    /// Loads a JSON array of strings.
    pub fn from_file(path: &Path) -> Result<Self, ScriptError> {
        let raw = fs::read_to_string(path).map_err(|e| ScriptError::Io(path.to_owned(), e.to_string()))?;
        let script: Vec<String> =
            serde_json::from_str(&raw).map_err(|e| ScriptError::Format(path.to_owned(), e.to_string()))?;
        Ok(Self::new(script))
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn cursor(&self) -> usize {
        *self.cursor.lock().unwrap()
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }
}

impl ChatBackend for ScriptedBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let mut cursor = self.cursor.lock().unwrap();
        let text = self
            .script
            .get(*cursor)
            .cloned()
            .ok_or(GatewayError::ScriptExhausted { consumed: *cursor })?;
        *cursor += 1;
        Ok(ChatResponse {
            prompt_tokens: request.estimated_prompt_tokens() as u64,
            completion_tokens: estimate_tokens(&text) as u64,
            text,
            latency: self.latency,
        })
    }
}

/// Wraps a backend and keeps every completion it returns, so a live run can
/// be saved as a script and replayed later.
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<Vec<String>>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, recorded: Mutex::new(Vec::new()) }
    }

    pub fn recorded(&self) -> Vec<String> {
        self.recorded.lock().unwrap().clone()
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let response = self.inner.complete(request)?;
        self.recorded.lock().unwrap().push(response.text.clone());
        Ok(response)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("cannot read script {0}: {1}")]
    Io(PathBuf, String),
    #[error("script {0} is not a JSON array of strings: {1}")]
    Format(PathBuf, String),
    #[error("no script recorded for {0}")]
    Missing(String),
}

/// Directory of per-URL scripts, one JSON file each, named by a hash of the
/// URL string.
#[derive(Debug, Clone)]
pub struct ScriptLibrary {
    root: PathBuf,
}

impl ScriptLibrary {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, url: &str) -> PathBuf {
        let digest = Sha256::digest(url.trim().as_bytes());
        self.root.join(format!("{}.json", &hex::encode(digest)[..16]))
    }

    pub fn backend_for(&self, url: &str) -> Result<ScriptedBackend, ScriptError> {
        let path = self.path_for(url);
        if !path.exists() {
            return Err(ScriptError::Missing(url.to_string()));
        }
        ScriptedBackend::from_file(&path)
    }

    pub fn save(&self, url: &str, script: &[String]) -> Result<PathBuf, ScriptError> {
        let path = self.path_for(url);
        fs::create_dir_all(&self.root).map_err(|e| ScriptError::Io(self.root.clone(), e.to_string()))?;
        let body = serde_json::to_string_pretty(script).expect("strings serialize");
        fs::write(&path, body + "\n").map_err(|e| ScriptError::Io(path.clone(), e.to_string()))?;
        Ok(path)
    }
}
