use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RawResponse;
use crate::miner::CommitTask;
use crate::splicer::{self, braces_balanced, normalize_whitespace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchScope {
    FunctionOnly,
    WholeFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedPatch {
    pub function_text: String,
    pub scope: PatchScope,
    pub is_empty: bool,
    pub is_partial: bool,
    pub stripped_citations: Vec<String>,
    /// A definition named like the target function was found in the block.
    pub target_found: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ExtractError {
    #[error("response contains no code")]
    NoCodeFound,
}

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"https?://[^\s<>"'`)\]]+"#).expect("valid regex"))
}

fn trim_url(u: &str) -> &str {
    u.trim_end_matches(['.', ',', ';', ':', '!', '?'])
}

/// URLs in order of first appearance, without duplicates.
pub fn find_urls(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for m in url_regex().find_iter(text) {
        let u = trim_url(m.as_str()).to_string();
        if !out.contains(&u) {
            out.push(u);
        }
    }
    out
}

fn strip_urls(text: &str) -> (String, Vec<String>) {
    let mut found = Vec::new();
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for m in url_regex().find_iter(text) {
        let url = trim_url(m.as_str());
        out.push_str(&text[last..m.start()]);
        last = m.start() + url.len();
        if !found.iter().any(|f: &String| f == url) {
            found.push(url.to_string());
        }
    }
    out.push_str(&text[last..]);
    (out, found)
}

/// Bodies of ``` fenced blocks. An unclosed fence runs to the end of text.
pub(crate) fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut open: Option<usize> = None;
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let is_fence = line.trim_start().starts_with("```");
        match open {
            None if is_fence => open = Some(pos + line.len()),
            Some(start) if is_fence => {
                blocks.push(&text[start..pos]);
                open = None;
            }
            _ => {}
        }
        pos += line.len();
    }
    if let Some(start) = open {
        blocks.push(&text[start.min(text.len())..]);
    }
    blocks
}

fn pre_function_text(task: &CommitTask) -> Option<String> {
    let span = match &task.function_span_pre {
        Some(s) => s.clone(),
        None => splicer::locate_function(&task.context_file_pre, &task.function_name).ok()?,
    };
    splicer::extract(&task.context_file_pre, &span).ok()
}

/// Prose without a semicolon ahead of a definition gets folded into its
/// declarator. Drop leading blank lines and lines ending like a sentence that
/// come before the line naming the function.
fn trim_leading_prose<'a>(text: &'a str, name: &str) -> &'a str {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.contains(name) {
            break;
        }
        let t = line.trim();
        if t.is_empty() || t.ends_with(':') || t.ends_with('.') || t.ends_with('!') {
            offset += line.len();
        } else {
            break;
        }
    }
    &text[offset..]
}

pub fn extract_patch(raw: &RawResponse, task: &CommitTask) -> Result<GeneratedPatch, ExtractError> {
    let blocks = fenced_blocks(&raw.text);
    let chosen = if blocks.is_empty() {
        raw.text.as_str()
    } else {
        // Largest block; the first one wins ties.
        let mut best = blocks[0];
        for b in &blocks[1..] {
            if b.len() > best.len() {
                best = b;
            }
        }
        best
    };
    let (block, stripped_citations) = strip_urls(chosen);
    if !block.contains('{') {
        return Err(ExtractError::NoCodeFound);
    }

    let block_fns = splicer::scan(&block).functions;
    let pre_fns = splicer::scan(&task.context_file_pre).functions;
    let whole_file = pre_fns.len() >= 2 && {
        let has = |name: &str| block_fns.iter().any(|f| f.name == name);
        let present = pre_fns.iter().filter(|f| has(&f.name)).count();
        has(&pre_fns[0].name) && present * 5 >= pre_fns.len() * 4
    };

    let target = block_fns.iter().find(|f| f.name == task.function_name);
    let target_text = target
        .and_then(|span| splicer::extract(&block, span).ok())
        .map(|t| trim_leading_prose(&t, &task.function_name).to_string());
    let (scope, function_text) = if whole_file {
        (PatchScope::WholeFile, block.clone())
    } else {
        (PatchScope::FunctionOnly, target_text.clone().unwrap_or_else(|| block.clone()))
    };

    let is_partial = raw.truncated || !braces_balanced(&function_text);
    let candidate_fn = target_text.as_deref().unwrap_or(&function_text);
    let same_as_pre_fn = pre_function_text(task)
        .is_some_and(|pre| normalize_whitespace(&pre) == normalize_whitespace(candidate_fn));
    let same_as_pre_file =
        scope == PatchScope::WholeFile && normalize_whitespace(&block) == normalize_whitespace(&task.context_file_pre);
    let is_empty = !is_partial && (same_as_pre_fn || same_as_pre_file);

    Ok(GeneratedPatch {
        function_text,
        scope,
        is_empty,
        is_partial,
        stripped_citations,
        target_found: target.is_some(),
    })
}
