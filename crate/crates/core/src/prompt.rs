//! The two fixed instruction templates, filled from a mined task.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::miner::{CommitKind, CommitTask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    FixTemplate,
    ImplementTemplate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub task_id: String,
    pub text: String,
    pub template_id: TemplateId,
    /// Always exactly one entry: the pre-commit context file.
    pub attachments: Vec<Attachment>,
    /// Whether the optional output-format sentence was appended.
    pub format_hint: bool,
}

impl Prompt {
    pub fn attachment(&self) -> &Attachment {
        &self.attachments[0]
    }

    /// Characters the provider will see: instruction plus attached file.
    pub fn char_len(&self) -> usize {
        self.text.chars().count() + self.attachments.iter().map(|a| a.text.chars().count()).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("task has no function name")]
    MissingFunctionName,
    #[error("task has an empty commit message")]
    EmptyMessage,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptOptions {
    /// Append a one-line request for code-only output. Off by default.
    pub format_hint: bool,
}

pub const FORMAT_HINT: &str = "Respond with only the complete C function.";

pub fn build_prompt(task: &CommitTask) -> Result<Prompt, PromptError> {
    build_prompt_with(task, PromptOptions::default())
}

pub fn build_prompt_with(task: &CommitTask, options: PromptOptions) -> Result<Prompt, PromptError> {
    let name = task.function_name.trim();
    if name.is_empty() {
        return Err(PromptError::MissingFunctionName);
    }
    let message = task.message.trim();
    if message.is_empty() {
        return Err(PromptError::EmptyMessage);
    }
    let (template_id, mut text) = match task.kind {
        CommitKind::BugFix => (
            TemplateId::FixTemplate,
            format!("Modify the function in the provided C file such that it fixes the following issue: {message} in {name}"),
        ),
        CommitKind::FeatureEnhancement => (
            TemplateId::ImplementTemplate,
            format!("Implement a function in the provided C file: {name} such that it {message}"),
        ),
    };
    if options.format_hint {
        text.push_str("\n\n");
        text.push_str(FORMAT_HINT);
    }
    let file_name = task
        .context_file_path
        .rsplit('/')
        .next()
        .unwrap_or(&task.context_file_path)
        .to_string();
    Ok(Prompt {
        task_id: task.task_id.clone(),
        text,
        template_id,
        attachments: vec![Attachment {
            name: file_name,
            text: task.context_file_pre.clone(),
        }],
        format_hint: options.format_hint,
    })
}
