//! Provider access: a common request/response shape over remote chat
//! endpoints and on-disk replay fixtures, plus patch extraction.

mod chat;
mod extract;
mod replay;

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::Prompt;

pub use chat::ChatProvider;
pub use extract::{extract_patch, find_urls, ExtractError, GeneratedPatch, PatchScope};
pub use replay::ReplayProvider;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub provider_id: String,
    /// Chat-completions URL for live providers.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Directory of recorded responses for the replay provider.
    #[serde(default)]
    pub fixture_dir: Option<PathBuf>,
    #[serde(default)]
    pub model_name: String,
    #[serde(default = "default_max_context_tokens")]
    pub max_context_tokens: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    /// Requests per minute; `None` means unlimited.
    #[serde(default)]
    pub rate_limit: Option<f64>,
    #[serde(default)]
    pub knowledge_cutoff: Option<NaiveDate>,
    /// Characters per token for the context-size estimate.
    #[serde(default = "default_chars_per_token")]
    pub chars_per_token: f64,
    /// Retries after transport failures. Content is never re-requested.
    #[serde(default)]
    pub network_retries: u32,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_output_tokens: Option<u32>,
}

fn default_max_context_tokens() -> usize {
    128_000
}
fn default_timeout_secs() -> f64 {
    300.0
}
fn default_chars_per_token() -> f64 {
    4.0
}

impl ProviderConfig {
    pub fn replay(provider_id: &str, dir: impl Into<PathBuf>) -> Self {
        Self {
            provider_id: provider_id.to_string(),
            endpoint: None,
            fixture_dir: Some(dir.into()),
            model_name: "replay".into(),
            max_context_tokens: default_max_context_tokens(),
            timeout_secs: default_timeout_secs(),
            rate_limit: None,
            knowledge_cutoff: None,
            chars_per_token: default_chars_per_token(),
            network_retries: 0,
            api_key_env: None,
            temperature: None,
            max_output_tokens: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let id = &self.provider_id;
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(format!("provider_id `{id}` must be nonempty and use [A-Za-z0-9._-]"));
        }
        match (&self.endpoint, &self.fixture_dir) {
            (Some(url), None) => {
                if !(url.starts_with("http://") || url.starts_with("https://")) {
                    return Err(format!("{id}: endpoint `{url}` is not an http(s) URL"));
                }
            }
            (None, Some(_)) => {}
            _ => return Err(format!("{id}: set exactly one of endpoint and fixture_dir")),
        }
        if !(self.timeout_secs > 0.0) {
            return Err(format!("{id}: timeout_secs must be positive"));
        }
        if !(self.chars_per_token > 0.0) {
            return Err(format!("{id}: chars_per_token must be positive"));
        }
        if self.max_context_tokens == 0 {
            return Err(format!("{id}: max_context_tokens must be positive"));
        }
        if let Some(r) = self.rate_limit {
            if !(r > 0.0) {
                return Err(format!("{id}: rate_limit must be positive"));
            }
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn is_replay(&self) -> bool {
        self.fixture_dir.is_some()
    }

    pub fn estimate_tokens(&self, prompt: &Prompt) -> usize {
        (prompt.char_len() as f64 / self.chars_per_token).ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub prompt: Option<u64>,
    pub completion: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    pub text: String,
    #[serde(default)]
    pub token_counts: TokenCounts,
    pub latency_ms: u64,
    /// The provider reported a length stop.
    pub truncated: bool,
    #[serde(default)]
    pub citations: Vec<String>,
    /// Request parameters actually sent, for reproducibility.
    #[serde(default)]
    pub request: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderError {
    #[error("provider timed out after {seconds}s")]
    ProviderTimeout { seconds: u64 },
    #[error("prompt needs about {estimated_tokens} tokens, limit is {max_context_tokens}")]
    ContextOverflow {
        estimated_tokens: usize,
        max_context_tokens: usize,
    },
    #[error("transport error: {message}")]
    TransportError { message: String },
    #[error("no replay fixture for task {task_id}")]
    FixtureMissing { task_id: String },
    #[error("provider misconfigured: {message}")]
    Config { message: String },
}

#[cfg(test)]
impl ProviderError {
    fn transport(message: impl Into<String>) -> Self {
        ProviderError::TransportError { message: message.into() }
    }
}

pub trait Provider: Send + Sync {
    fn generate(&self, prompt: &Prompt) -> Result<RawResponse, ProviderError>;
}

/// Wraps one provider with its context check, rate limit and transport
/// retries. Shareable across worker threads.
pub struct Gateway {
    config: ProviderConfig,
    inner: Box<dyn Provider>,
    next_slot: Mutex<Option<Instant>>,
}

impl Gateway {
    pub fn new(config: ProviderConfig, inner: Box<dyn Provider>) -> Self {
        Self {
            config,
            inner,
            next_slot: Mutex::new(None),
        }
    }

    pub fn from_config(config: ProviderConfig) -> Result<Self, ProviderError> {
        config
            .validate()
            .map_err(|message| ProviderError::Config { message })?;
        let inner: Box<dyn Provider> = match (&config.endpoint, &config.fixture_dir) {
            (_, Some(dir)) => Box::new(ReplayProvider::new(dir.clone())),
            (Some(_), None) => Box::new(ChatProvider::new(config.clone())?),
            (None, None) => unreachable!("validated"),
        };
        Ok(Self::new(config, inner))
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn wait_for_slot(&self) {
        let Some(per_minute) = self.config.rate_limit else { return };
        let interval = Duration::from_secs_f64(60.0 / per_minute);
        let slot = {
            let mut next = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }

    /// One request for one prompt.
    pub fn generate(&self, prompt: &Prompt) -> Result<RawResponse, ProviderError> {
        let estimated_tokens = self.config.estimate_tokens(prompt);
        if estimated_tokens > self.config.max_context_tokens {
            return Err(ProviderError::ContextOverflow {
                estimated_tokens,
                max_context_tokens: self.config.max_context_tokens,
            });
        }
        let mut attempt = 0;
        loop {
            self.wait_for_slot();
            match self.inner.generate(prompt) {
                Err(ProviderError::TransportError { message }) if attempt < self.config.network_retries => {
                    attempt += 1;
                    tracing::warn!(provider = %self.config.provider_id, attempt, %message, "transport failure, retrying");
                }
                other => return other,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::CommitKind;
    use crate::prompt::{build_prompt, tests::task};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    struct Flaky {
        calls: Arc<AtomicUsize>,
        failures: usize,
    }

    impl Provider for Flaky {
        fn generate(&self, _: &Prompt) -> Result<RawResponse, ProviderError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(ProviderError::transport("connection reset"))
            } else {
                Ok(RawResponse {
                    text: "ok".into(),
                    ..Default::default()
                })
            }
        }
    }

    fn prompt() -> Prompt {
        build_prompt(&task(CommitKind::BugFix, "json_object_clear", "Fix a use after free")).unwrap()
    }

    #[test]
    fn context_overflow_uses_char_estimate() {
        let p = prompt();
        let mut cfg = ProviderConfig::replay("r", "/nonexistent");
        cfg.max_context_tokens = p.char_len() / 4 - 1;
        let calls = Arc::new(AtomicUsize::new(0));
        let gw = Gateway::new(cfg, Box::new(Flaky { calls: calls.clone(), failures: 0 }));
        assert!(matches!(gw.generate(&p), Err(ProviderError::ContextOverflow { .. })));
        assert_eq!(calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn transport_failures_retry_up_to_limit() {
        let calls = Arc::new(AtomicUsize::new(0));
        let mut cfg = ProviderConfig::replay("r", "/nonexistent");
        cfg.network_retries = 2;
        let gw = Gateway::new(cfg.clone(), Box::new(Flaky { calls: calls.clone(), failures: 2 }));
        assert_eq!(gw.generate(&prompt()).unwrap().text, "ok");
        assert_eq!(calls.load(Ordering::SeqCst), 3);

        let calls = Arc::new(AtomicUsize::new(0));
        cfg.network_retries = 1;
        let gw = Gateway::new(cfg, Box::new(Flaky { calls: calls.clone(), failures: 5 }));
        assert!(matches!(gw.generate(&prompt()), Err(ProviderError::TransportError { .. })));
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn rate_limit_spaces_requests() {
        let calls = Arc::new(AtomicUsize::new(0));
        let mut cfg = ProviderConfig::replay("r", "/nonexistent");
        cfg.rate_limit = Some(600.0);
        let gw = Gateway::new(cfg, Box::new(Flaky { calls, failures: 0 }));
        let start = Instant::now();
        for _ in 0..3 {
            gw.generate(&prompt()).unwrap();
        }
        assert!(start.elapsed() >= Duration::from_millis(200));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ProviderConfig::replay("r", "/tmp");
        assert!(cfg.validate().is_ok());
        cfg.endpoint = Some("http://localhost:1/v1/chat/completions".into());
        assert!(cfg.validate().is_err());
        cfg.fixture_dir = None;
        assert!(cfg.validate().is_ok());
        cfg.timeout_secs = 0.0;
        assert!(cfg.validate().is_err());
    }
}
