//! HTTP client for an external text-completion endpoint.
//!
//! Request body `{"prompt": ..., "max_length": ...}`, response body
//! `{"text": ...}`. The key, when set, is sent as a bearer token.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use convxai_core::explain::{GeneratorError, TextGenerator};

pub const URL_ENV: &str = "CONVXAI_GENERATOR_URL";
pub const KEY_ENV: &str = "CONVXAI_GENERATOR_KEY";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(20);
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_length: usize,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

pub struct HttpGenerator {
    url: String,
    key: Option<String>,
    client: reqwest::blocking::Client,
    in_flight: AtomicUsize,
    max_in_flight: usize,
}

impl HttpGenerator {
    pub fn new(url: impl Into<String>, key: Option<String>, timeout: Duration, max_in_flight: usize) -> Result<Self, GeneratorError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GeneratorError::Transport(e.to_string()))?;
        Ok(Self { url: url.into(), key, client, in_flight: AtomicUsize::new(0), max_in_flight: max_in_flight.max(1) })
    }

    /// Client configured from the environment; `None` when no URL is set.
    pub fn from_env() -> Result<Option<Self>, GeneratorError> {
        match std::env::var(URL_ENV) {
            Ok(url) if !url.trim().is_empty() => {
                let key = std::env::var(KEY_ENV).ok().filter(|k| !k.is_empty());
                Self::new(url.trim(), key, DEFAULT_TIMEOUT, DEFAULT_MAX_IN_FLIGHT).map(Some)
            }
            _ => Ok(None),
        }
    }

    fn send(&self, prompt: &str, max_length: usize) -> Result<String, GeneratorError> {
        let mut req = self.client.post(&self.url).json(&CompletionRequest { prompt, max_length });
        if let Some(key) = &self.key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                GeneratorError::Timeout
            } else {
                GeneratorError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(GeneratorError::Transport(format!("status {status}")));
        }
        let body: CompletionResponse = resp.json().map_err(|e| {
            if e.is_timeout() {
                GeneratorError::Timeout
            } else {
                GeneratorError::Transport(e.to_string())
            }
        })?;
        Ok(body.text)
    }
}

struct Slot<'a>(&'a AtomicUsize);

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

impl TextGenerator for HttpGenerator {
    /// Requests over the in-flight bound fail fast with `Busy`; callers fall
    /// back to retrieval.
    fn complete(&self, prompt: &str, max_length: usize) -> Result<String, GeneratorError> {
        let taken = self.in_flight.fetch_add(1, Ordering::SeqCst);
        let _slot = Slot(&self.in_flight);
        if taken >= self.max_in_flight {
            return Err(GeneratorError::Busy);
        }
        self.send(prompt, max_length)
    }
}
