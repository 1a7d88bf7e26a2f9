use std::time::Instant;

use serde_json::{json, Value};

use super::{find_urls, Provider, ProviderConfig, ProviderError, RawResponse, TokenCounts};
use crate::prompt::Prompt;

/// OpenAI-compatible chat-completions client. Local inference servers that
/// expose the same route work unchanged; only the endpoint differs.
pub struct ChatProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl ChatProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| ProviderError::Config {
                message: format!("{}: environment variable {var} is not set", config.provider_id),
            })?),
            None => None,
        };
        let agent = ureq::AgentBuilder::new().timeout(config.timeout()).build();
        Ok(Self { config, agent, api_key })
    }

    /// The attached file is inlined after the instruction.
    pub(crate) fn request_body(&self, prompt: &Prompt) -> Value {
        let file = prompt.attachment();
        let content = format!("{}\n\n{}:\n```c\n{}\n```", prompt.text, file.name, file.text);
        let mut body = json!({
            "model": self.config.model_name,
            "messages": [{ "role": "user", "content": content }],
        });
        if let Some(t) = self.config.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(m) = self.config.max_output_tokens {
            body["max_tokens"] = json!(m);
        }
        body
    }
}

fn request_summary(body: &Value) -> Value {
    let mut summary = body.clone();
    // The message text is already persisted with the prompt.
    summary["messages"] = json!("<prompt>");
    summary["attachment_mode"] = json!("inline");
    summary
}

impl Provider for ChatProvider {
    fn generate(&self, prompt: &Prompt) -> Result<RawResponse, ProviderError> {
        let url = self.config.endpoint.as_deref().ok_or_else(|| ProviderError::Config {
            message: "chat provider without endpoint".into(),
        })?;
        let body = self.request_body(prompt);
        let mut req = self.agent.post(url).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let started = Instant::now();
        let resp = match req.send_json(body.clone()) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, r)) => {
                let detail = r.into_string().unwrap_or_default();
                return Err(ProviderError::TransportError {
                    message: format!("HTTP {code}: {}", detail.chars().take(500).collect::<String>()),
                });
            }
            Err(ureq::Error::Transport(t)) => {
                let message = t.to_string();
                if message.contains("timed out") || message.contains("Timeout") {
                    return Err(ProviderError::ProviderTimeout {
                        seconds: self.config.timeout().as_secs(),
                    });
                }
                return Err(ProviderError::TransportError { message });
            }
        };
        let value: Value = resp.into_json().map_err(|e| {
            if e.kind() == std::io::ErrorKind::TimedOut || e.kind() == std::io::ErrorKind::WouldBlock {
                ProviderError::ProviderTimeout {
                    seconds: self.config.timeout().as_secs(),
                }
            } else {
                ProviderError::TransportError {
                    message: format!("bad response body: {e}"),
                }
            }
        })?;
        let latency_ms = started.elapsed().as_millis() as u64;
        let choice = &value["choices"][0];
        let text = choice["message"]["content"].as_str().unwrap_or_default().to_string();
        let truncated = choice["finish_reason"].as_str() == Some("length");
        let token_counts = TokenCounts {
            prompt: value["usage"]["prompt_tokens"].as_u64(),
            completion: value["usage"]["completion_tokens"].as_u64(),
        };
        let mut citations: Vec<String> = value["citations"]
            .as_array()
            .map(|a| a.iter().filter_map(|c| c.as_str().map(str::to_string)).collect())
            .unwrap_or_default();
        for url in find_urls(&text) {
            if !citations.contains(&url) {
                citations.push(url);
            }
        }
        Ok(RawResponse {
            text,
            token_counts,
            latency_ms,
            truncated,
            citations,
            request: request_summary(&body),
        })
    }
}
