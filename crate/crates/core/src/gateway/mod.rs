//! Chat-completion backends.
//!
//! Every backend sits behind [`ChatBackend`]. Callers go through
//! [`ChatBackend::complete`], which validates the request (message list,
//! temperature range, context budget) and cuts the returned text at the first
//! configured stop sequence, so no backend ever hands back text containing a
//! stop sequence.

mod http;
mod scripted;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::HttpBackend;
pub use scripted::{RecordingBackend, ScriptLibrary, ScriptedBackend};

/// Default context window, in estimated tokens.
pub const DEFAULT_MAX_CONTEXT_TOKENS: usize = 128_000;
/// Default sampling temperature.
pub const DEFAULT_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("transport error: {message}")]
    Transport { status: Option<u16>, message: String },
    #[error("prompt of ~{estimated} tokens exceeds the context limit of {limit}")]
    ContextOverflow { estimated: usize, limit: usize },
    #[error("scripted backend exhausted after {consumed} completions")]
    ScriptExhausted { consumed: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_context_tokens: usize,
    pub stop_sequences: Vec<String>,
    pub model_id: String,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self {
            messages,
            temperature: DEFAULT_TEMPERATURE,
            max_context_tokens: DEFAULT_MAX_CONTEXT_TOKENS,
            stop_sequences: Vec::new(),
            model_id: model_id.into(),
        }
    }

    pub fn with_stop(mut self, stop: impl Into<String>) -> Self {
        self.stop_sequences.push(stop.into());
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_context_tokens(mut self, limit: usize) -> Self {
        self.max_context_tokens = limit;
        self
    }

    /// Sum of [`estimate_tokens`] over all message bodies.
    pub fn estimated_prompt_tokens(&self) -> usize {
        self.messages.iter().map(|m| estimate_tokens(&m.content)).sum()
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("messages must not be empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_context_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_context_tokens must be positive".into()));
        }
        let estimated = self.estimated_prompt_tokens();
        if estimated > self.max_context_tokens {
            return Err(GatewayError::ContextOverflow { estimated, limit: self.max_context_tokens });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency: Duration,
}

pub trait ChatBackend: Send + Sync {
    /// Backend-specific call. Implementations may return text that still
    /// contains stop sequences; [`ChatBackend::complete`] strips them.
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let mut response = self.send(request)?;
        let cut = truncate_at_stop(&response.text, &request.stop_sequences).len();
        response.text.truncate(cut);
        Ok(response)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).send(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).send(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).send(request)
    }
}

/// Token estimate: characters / 4, rounded up.
///
/// This is a heuristic. It only feeds the context-budget check and the cost
/// report, neither of which needs tokenizer-exact counts.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Returns the prefix of `text` before the earliest occurrence of any stop
/// sequence. Empty stop strings are ignored.
pub fn truncate_at_stop<'a>(text: &'a str, stops: &[String]) -> &'a str {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    &text[..cut]
}
