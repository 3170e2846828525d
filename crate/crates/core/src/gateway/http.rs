use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{estimate_tokens, ChatBackend, ChatMessage, ChatRequest, ChatResponse, GatewayError};

/// OpenAI-compatible `chat/completions` client.
///
/// Transient failures (connection errors, timeouts, HTTP 429 and 5xx) are
/// retried with exponential backoff; other HTTP errors fail immediately.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
    max_retries: u32,
    backoff_base: Duration,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    stop: &'a [String],
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

enum Attempt {
    Retry(GatewayError),
    Fail(GatewayError),
}

impl HttpBackend {
    /// `endpoint` is the full chat-completions URL.
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("reqwest client builds with static configuration");
        Self {
            client,
            endpoint: endpoint.into(),
            api_key,
            max_retries: 3,
            backoff_base: Duration::from_secs(1),
        }
    }

    /// Reads the credential from `env_var`; a missing variable is a
    /// configuration error.
    pub fn from_env(endpoint: impl Into<String>, env_var: &str, timeout: Duration) -> Result<Self, GatewayError> {
        let key = std::env::var(env_var)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| GatewayError::MissingCredential(env_var.to_string()))?;
        Ok(Self::new(endpoint, Some(key), timeout))
    }

    pub fn with_retries(mut self, max_retries: u32, backoff_base: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff_base = backoff_base;
        self
    }

    fn attempt(&self, request: &ChatRequest) -> Result<ChatResponse, Attempt> {
        let body = WireRequest {
            model: &request.model_id,
            messages: &request.messages,
            temperature: request.temperature,
            stop: &request.stop_sequences,
        };
        let started = Instant::now();
        let mut call = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call.send().map_err(|e| {
            Attempt::Retry(GatewayError::Transport { status: None, message: e.to_string() })
        })?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            let err = GatewayError::Transport {
                status: Some(status.as_u16()),
                message: format!("HTTP {}: {}", status.as_u16(), text.chars().take(300).collect::<String>()),
            };
            return Err(if status.as_u16() == 429 || status.is_server_error() {
                Attempt::Retry(err)
            } else {
                Attempt::Fail(err)
            });
        }
        let parsed: WireResponse = response.json().map_err(|e| {
            Attempt::Fail(GatewayError::Transport { status: Some(status.as_u16()), message: format!("bad response body: {e}") })
        })?;
        let latency = started.elapsed();
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        let (prompt_tokens, completion_tokens) = match parsed.usage {
            Some(u) => (u.prompt_tokens, u.completion_tokens),
            None => (request.estimated_prompt_tokens() as u64, estimate_tokens(&text) as u64),
        };
        Ok(ChatResponse { text, prompt_tokens, completion_tokens, latency })
    }
}

impl ChatBackend for HttpBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let mut delay = self.backoff_base;
        let mut tries = 0;
        loop {
            match self.attempt(request) {
                Ok(response) => return Ok(response),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(e)) if tries >= self.max_retries => return Err(e),
                Err(Attempt::Retry(e)) => {
                    tracing::warn!(error = %e, attempt = tries + 1, "retrying chat completion");
                    thread::sleep(delay);
                    delay *= 2;
                    tries += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::StubServer;

    fn completion_body(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 7}
        })
        .to_string()
    }

    fn request() -> ChatRequest {
        ChatRequest::new("test-model", vec![ChatMessage::user("Question: analyze")]).with_stop("Observation:")
    }

    #[test]
    fn live_completion_is_cut_before_observation() {
        let server = StubServer::json(200, completion_body("Thought: look\nAction: Access URL\nAction Input: https://a.example\nObservation: fake"));
        let backend = HttpBackend::new(server.url("/v1/chat/completions"), Some("k".into()), Duration::from_secs(5));
        let out = backend.complete(&request()).unwrap();
        assert_eq!(out.text, "Thought: look\nAction: Access URL\nAction Input: https://a.example\n");
        assert_eq!((out.prompt_tokens, out.completion_tokens), (12, 7));

        let seen = server.requests();
        assert_eq!(seen.len(), 1);
        let sent: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
        assert_eq!(sent["model"], "test-model");
        assert_eq!(sent["stop"][0], "Observation:");
        assert_eq!(sent["temperature"], 0.7);
        assert_eq!(sent["messages"][0]["role"], "user");
        assert!(seen[0].head.to_ascii_lowercase().contains("authorization: bearer k"));
    }

    #[test]
    fn client_errors_are_not_retried() {
        let server = StubServer::json(401, "{\"error\":\"nope\"}".into());
        let backend = HttpBackend::new(server.url("/c"), None, Duration::from_secs(5))
            .with_retries(3, Duration::from_millis(1));
        let err = backend.complete(&request()).unwrap_err();
        assert!(matches!(err, GatewayError::Transport { status: Some(401), .. }));
        assert_eq!(server.requests().len(), 1);
    }

    #[test]
    fn server_errors_are_retried_three_times() {
        let server = StubServer::json(503, "busy".into());
        let backend = HttpBackend::new(server.url("/c"), None, Duration::from_secs(5))
            .with_retries(3, Duration::from_millis(1));
        assert!(backend.complete(&request()).is_err());
        assert_eq!(server.requests().len(), 4);
    }

    #[test]
    fn missing_credential_names_variable() {
        let err = HttpBackend::from_env("http://127.0.0.1:9", "SCAM_AGENT_TEST_UNSET_KEY", Duration::from_secs(1))
            .err()
            .unwrap();
        assert_eq!(err, GatewayError::MissingCredential("SCAM_AGENT_TEST_UNSET_KEY".into()));
    }
}
