//! Blocking chat-completions client for any OpenAI-compatible endpoint,
//! with bounded retries, an in-flight request cap, and record/replay caching.

use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::cache::{cache_key, CacheMode, TranscriptCache};
use crate::{Error, Result};

pub const API_KEY_ENV: &str = "LLM_API_KEY";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub cache_mode: CacheMode,
    pub cache_file: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo".into(),
            temperature: 0.1,
            max_tokens: 512,
            timeout_secs: 60,
            max_retries: 3,
            max_in_flight: 4,
            cache_mode: CacheMode::Off,
            cache_file: None,
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature < 0.0 {
            return Err(Error::InvalidConfig("temperature must be >= 0".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::InvalidConfig("max_in_flight must be >= 1".into()));
        }
        if self.endpoint.trim().is_empty() {
            return Err(Error::InvalidConfig("endpoint must be non-empty".into()));
        }
        Ok(())
    }
}

/// Counting semaphore for the in-flight request cap.
struct Gate {
    available: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(cap: usize) -> Self {
        Gate {
            available: Mutex::new(cap),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut available = self.available.lock().expect("gate lock poisoned");
        while *available == 0 {
            available = self.cv.wait(available).expect("gate lock poisoned");
        }
        *available -= 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut available = self.gate.available.lock().expect("gate lock poisoned");
        *available += 1;
        self.gate.cv.notify_one();
    }
}

pub struct LlmClient {
    config: LlmConfig,
    http: Option<reqwest::blocking::Client>,
    cache: TranscriptCache,
    gate: Gate,
    api_key: Option<String>,
}

impl LlmClient {
    pub fn new(config: LlmConfig) -> Result<Self> {
        config.validate()?;
        let cache = TranscriptCache::open(config.cache_mode, config.cache_file.as_deref())?;
        // Replay mode never touches the network, so no client is built.
        let http = if config.cache_mode == CacheMode::Replay {
            None
        } else {
            Some(
                reqwest::blocking::Client::builder()
                    .timeout(Duration::from_secs(config.timeout_secs))
                    .build()
                    .map_err(|e| Error::Transport(e.to_string()))?,
            )
        };
        let gate = Gate::new(config.max_in_flight);
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Ok(LlmClient {
            config,
            http,
            cache,
            gate,
            api_key,
        })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    /// The endpoint-independent request body; also the cache-key input.
    pub fn request_body(&self, messages: &[ChatMessage]) -> serde_json::Value {
        json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        })
    }

    /// Send a chat request and return the first choice's message content.
    /// Replay mode serves from cache; record mode persists the transcript.
    pub fn chat_complete(&self, messages: &[ChatMessage]) -> Result<String> {
        if messages.is_empty() {
            return Err(Error::EmptyInput("messages"));
        }
        let body = self.request_body(messages);
        let key = cache_key(&body);

        if self.cache.mode() == CacheMode::Replay {
            return self.cache.lookup(&key);
        }

        let _slot = self.gate.acquire();
        let content = self.post_with_retries(&body)?;
        if self.cache.mode() == CacheMode::Record {
            self.cache.append(&key, &body, &content)?;
        }
        Ok(content)
    }

    fn post_with_retries(&self, body: &serde_json::Value) -> Result<String> {
        let http = self
            .http
            .as_ref()
            .expect("http client exists outside replay mode");
        let url = format!(
            "{}/chat/completions",
            self.config.endpoint.trim_end_matches('/')
        );
        let attempts = self.config.max_retries + 1;
        let mut last_err = Error::Transport("no attempt made".into());
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = Duration::from_millis(250u64.saturating_mul(1 << (attempt - 1)))
                    .min(Duration::from_secs(4));
                std::thread::sleep(backoff);
            }
            let mut request = http.post(&url).json(body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Err(e) => {
                    last_err = Error::Transport(e.to_string());
                }
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let text = response
                            .text()
                            .map_err(|e| Error::Transport(e.to_string()))?;
                        return extract_content(&text);
                    }
                    let body_text = response.text().unwrap_or_default();
                    let err = Error::Http {
                        status: status.as_u16(),
                        body: truncate(&body_text, 500),
                    };
                    // 429 and server errors are retryable, other client
                    // errors are not.
                    if status.as_u16() == 429 || status.is_server_error() {
                        last_err = err;
                    } else {
                        return Err(err);
                    }
                }
            }
        }
        Err(last_err)
    }
}

fn truncate(s: &str, limit: usize) -> String {
    if s.len() <= limit {
        s.to_string()
    } else {
        let mut end = limit;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}...", &s[..end])
    }
}

fn extract_content(body: &str) -> Result<String> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|_| Error::MalformedResponse(truncate(body, 200)))?;
    value
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| Error::MalformedResponse(truncate(body, 200)))
}
