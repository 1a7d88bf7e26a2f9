use std::path::PathBuf;

use serde::Deserialize;

use super::{find_urls, Provider, ProviderError, RawResponse};
use crate::prompt::Prompt;

/// Reads `<dir>/<task_id>` as the raw model output. An optional
/// `<dir>/<task_id>.meta.json` can mark the response as length-truncated or
/// carry side-channel citations.
pub struct ReplayProvider {
    dir: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Meta {
    truncated: bool,
    citations: Vec<String>,
}

impl ReplayProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl Provider for ReplayProvider {
    fn generate(&self, prompt: &Prompt) -> Result<RawResponse, ProviderError> {
        let path = self.dir.join(&prompt.task_id);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ProviderError::FixtureMissing {
                    task_id: prompt.task_id.clone(),
                })
            }
            Err(e) => {
                return Err(ProviderError::TransportError {
                    message: format!("{}: {e}", path.display()),
                })
            }
        };
        let meta_path = self.dir.join(format!("{}.meta.json", prompt.task_id));
        let meta: Meta = match std::fs::read_to_string(&meta_path) {
            Ok(raw) => serde_json::from_str(&raw).map_err(|e| ProviderError::Config {
                message: format!("{}: {e}", meta_path.display()),
            })?,
            Err(_) => Meta::default(),
        };
        let mut citations = meta.citations;
        for url in find_urls(&text) {
            if !citations.contains(&url) {
                citations.push(url);
            }
        }
        Ok(RawResponse {
            text,
            token_counts: Default::default(),
            latency_ms: 0,
            truncated: meta.truncated,
            citations,
            request: serde_json::json!({ "replay": prompt.task_id }),
        })
    }
}
