//! Blocking client for OpenAI-compatible chat-completions and embeddings.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{ChatModel, CompletionRequest, Embedder, EmbeddingVector};
use crate::error::{Error, Result};

pub const API_KEY_ENV: &str = "TCSR_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << attempt.min(16))
    }
}

enum Failure {
    Transient(String),
    Fatal(String),
}

#[derive(Debug, Clone)]
struct HttpEndpoint {
    base_url: String,
    model: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    client: Client,
}

impl HttpEndpoint {
    fn new(base_url: &str, model: &str, api_key: Option<String>, retry: RetryPolicy) -> Result<Self> {
        let client = Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            retry,
            client,
        })
    }

    fn post_once(&self, path: &str, payload: &Value) -> std::result::Result<Value, Failure> {
        let mut req = self.client.post(format!("{}/{}", self.base_url, path)).json(payload);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status();
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(Failure::Transient(format!("HTTP {status}")));
        }
        let body = resp.text().map_err(|e| Failure::Transient(e.to_string()))?;
        if !status.is_success() {
            return Err(Failure::Fatal(format!("HTTP {status}: {body}")));
        }
        serde_json::from_str(&body).map_err(|e| Failure::Fatal(format!("bad response body: {e}")))
    }

    fn post(&self, path: &str, payload: &Value) -> Result<Value> {
        let mut attempt = 0;
        loop {
            match self.post_once(path, payload) {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(message)) => {
                    return Err(Error::Transport {
                        attempts: attempt + 1,
                        message,
                    })
                }
                Err(Failure::Transient(message)) => {
                    if attempt >= self.retry.retries {
                        return Err(Error::Transport {
                            attempts: attempt + 1,
                            message,
                        });
                    }
                    log::warn!("transient LLM failure ({message}); retrying");
                    std::thread::sleep(self.retry.delay(attempt));
                    attempt += 1;
                }
            }
        }
    }
}

fn api_key_from_env() -> Option<String> {
    std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty())
}

/// Chat-completions adapter. The API key comes from `TCSR_API_KEY`.
#[derive(Debug, Clone)]
pub struct OpenAiChat {
    endpoint: HttpEndpoint,
}

impl OpenAiChat {
    pub fn new(base_url: &str, model: &str, retry: RetryPolicy) -> Result<Self> {
        Self::with_key(base_url, model, api_key_from_env(), retry)
    }

    pub fn with_key(base_url: &str, model: &str, api_key: Option<String>, retry: RetryPolicy) -> Result<Self> {
        Ok(Self {
            endpoint: HttpEndpoint::new(base_url, model, api_key, retry)?,
        })
    }

    pub fn payload(&self, request: &CompletionRequest) -> Value {
        json!({
            "model": self.endpoint.model,
            "messages": [{"role": "user", "content": request.prompt()}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }
}

impl ChatModel for OpenAiChat {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let body = self.endpoint.post("chat/completions", &self.payload(request))?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Error::Transport {
                attempts: 1,
                message: "response has no choices[0].message.content".into(),
            })
    }
}

#[derive(Debug, Clone)]
pub struct OpenAiEmbedder {
    endpoint: HttpEndpoint,
}

impl OpenAiEmbedder {
    pub fn new(base_url: &str, model: &str, retry: RetryPolicy) -> Result<Self> {
        Self::with_key(base_url, model, api_key_from_env(), retry)
    }

    pub fn with_key(base_url: &str, model: &str, api_key: Option<String>, retry: RetryPolicy) -> Result<Self> {
        Ok(Self {
            endpoint: HttpEndpoint::new(base_url, model, api_key, retry)?,
        })
    }
}

impl Embedder for OpenAiEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.trim().is_empty() {
            return Err(Error::EmptyEmbeddingInput);
        }
        let body = self
            .endpoint
            .post("embeddings", &json!({"model": self.endpoint.model, "input": text}))?;
        let values = body
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidEmbedding("response has no data[0].embedding".into()))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| Error::InvalidEmbedding("non-numeric component".into()))
            })
            .collect::<Result<Vec<f64>>>()?;
        EmbeddingVector::new(values)
    }
}
