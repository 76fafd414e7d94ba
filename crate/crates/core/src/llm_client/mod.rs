//! Chat-completion clients: an HTTP client for servers speaking the common
//! `/chat/completions` wire shape, and a seeded mock for offline runs.

mod http;
mod mock;

pub use http::HttpGenerator;
pub use mock::{MockGenerator, ScriptedGenerator};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::time::Duration;

use crate::corpus::ChatMessage;

pub const ENV_BASE_URL: &str = "GENERATOR_BASE_URL";
pub const ENV_API_KEY: &str = "GENERATOR_API_KEY";
pub const ENV_MODEL: &str = "GENERATOR_MODEL";

const MAX_BACKOFF: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeneratorError {
    #[error("request has no messages")]
    EmptyMessages,
    #[error("generator unavailable after {attempts} attempt(s): {last_error}")]
    Unavailable { attempts: u32, last_error: String },
    #[error("generator rejected the request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

/// An API key that never shows up in logs, `Debug` output or serialized
/// configs.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Self {
        Secret(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.0.is_empty() { "\"\"" } else { "\"<redacted>\"" })
    }
}

impl Serialize for Secret {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(if self.0.is_empty() { "" } else { "<redacted>" })
    }
}

impl<'de> Deserialize<'de> for Secret {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(Secret)
    }
}

fn default_temperature() -> f64 {
    0.7
}
fn default_max_retries() -> u32 {
    3
}
fn default_timeout_secs() -> f64 {
    60.0
}
fn default_backoff_ms() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default)]
    pub base_url: String,
    #[serde(default)]
    pub model_name: String,
    #[serde(default)]
    pub api_key: Secret,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    /// Delay before the first retry; doubles on every further retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    /// When set, a [`MockGenerator`] is used and no network I/O happens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_seed: Option<u64>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            base_url: String::new(),
            model_name: String::new(),
            api_key: Secret::default(),
            temperature: default_temperature(),
            max_retries: default_max_retries(),
            timeout_secs: default_timeout_secs(),
            backoff_base_ms: default_backoff_ms(),
            mock_seed: None,
        }
    }
}

impl GeneratorConfig {
    pub fn mock(seed: u64) -> Self {
        GeneratorConfig {
            mock_seed: Some(seed),
            ..Default::default()
        }
    }

    /// Fill empty endpoint fields from `GENERATOR_BASE_URL`,
    /// `GENERATOR_API_KEY` and `GENERATOR_MODEL`.
    pub fn with_env_fallback(mut self) -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        if self.base_url.is_empty() {
            if let Some(v) = var(ENV_BASE_URL) {
                self.base_url = v;
            }
        }
        if self.api_key.is_empty() {
            if let Some(v) = var(ENV_API_KEY) {
                self.api_key = Secret(v);
            }
        }
        if self.model_name.is_empty() {
            if let Some(v) = var(ENV_MODEL) {
                self.model_name = v;
            }
        }
        self
    }

    pub fn from_env() -> Self {
        GeneratorConfig::default().with_env_fallback()
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GeneratorError::InvalidConfig(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(GeneratorError::InvalidConfig(format!("timeout_secs must be > 0, got {}", self.timeout_secs)));
        }
        if self.mock_seed.is_none() && self.base_url.is_empty() {
            return Err(GeneratorError::InvalidConfig(format!(
                "no base_url configured and no mock_seed set (try {ENV_BASE_URL})"
            )));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Sleep before retry number `retry` (0-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let base = Duration::from_millis(self.backoff_base_ms);
        base.checked_mul(1u32.checked_shl(retry).unwrap_or(u32::MAX))
            .unwrap_or(MAX_BACKOFF)
            .min(MAX_BACKOFF)
    }

    /// The mock when `mock_seed` is set, the HTTP client otherwise.
    pub fn build(&self) -> Result<Box<dyn Generator>, GeneratorError> {
        self.validate()?;
        Ok(match self.mock_seed {
            Some(seed) => Box::new(MockGenerator::new(seed).with_temperature(self.temperature)),
            None => Box::new(HttpGenerator::new(self.clone())?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    /// Sampling seed forwarded to the server; distinguishes repeated
    /// requests for the same prompt.
    pub seed: u64,
}

impl CompletionRequest {
    pub fn new(messages: Vec<ChatMessage>, seed: u64) -> Self {
        CompletionRequest { messages, seed }
    }

    pub fn user(content: impl Into<String>, seed: u64) -> Self {
        CompletionRequest::new(vec![ChatMessage::user(content)], seed)
    }
}

/// A chat-completion backend. Implementations are shared across worker
/// threads.
pub trait Generator: Send + Sync {
    fn name(&self) -> &str;
    fn temperature(&self) -> f64;
    fn complete(&self, request: &CompletionRequest) -> Result<String, GeneratorError>;
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn temperature(&self) -> f64 {
        (**self).temperature()
    }
    fn complete(&self, request: &CompletionRequest) -> Result<String, GeneratorError> {
        (**self).complete(request)
    }
}
