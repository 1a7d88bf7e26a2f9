//! Commit mining: walk a repository's history, keep single-file single-function
//! commits, and turn each into a self-contained evaluation task.

mod git;

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use git::Git;

use crate::splicer::{self, FunctionSpan, SpliceError};
use crate::udiff::{self, DiffError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitKind {
    BugFix,
    FeatureEnhancement,
}

impl CommitKind {
    pub fn label(self) -> &'static str {
        match self {
            CommitKind::BugFix => "bug_fix",
            CommitKind::FeatureEnhancement => "feature_enhancement",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl DateRange {
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.from <= d && d <= self.to
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionCriteria {
    pub max_patch_loc: usize,
    pub max_files_changed: usize,
    pub max_functions_changed: usize,
    pub min_message_tokens: usize,
    pub allowed_kinds: BTreeSet<CommitKind>,
    pub date_range: Option<DateRange>,
    /// File extensions treated as C implementation files, with the dot.
    pub extensions: Vec<String>,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        Self {
            max_patch_loc: 66,
            max_files_changed: 1,
            max_functions_changed: 1,
            min_message_tokens: 4,
            allowed_kinds: [CommitKind::BugFix, CommitKind::FeatureEnhancement].into_iter().collect(),
            date_range: None,
            extensions: vec![".c".to_string()],
        }
    }
}

impl SelectionCriteria {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_patch_loc == 0 {
            return Err("max_patch_loc must be positive".into());
        }
        if self.max_files_changed == 0 {
            return Err("max_files_changed must be positive".into());
        }
        if self.max_functions_changed != 1 {
            return Err("only single-function commits can be mined (max_functions_changed = 1)".into());
        }
        if self.allowed_kinds.is_empty() {
            return Err("allowed_kinds is empty".into());
        }
        if let Some(r) = &self.date_range {
            if r.from > r.to {
                return Err(format!("date_range starts after it ends ({} > {})", r.from, r.to));
            }
        }
        Ok(())
    }

    fn is_c_file(&self, path: &str) -> bool {
        self.extensions.iter().any(|ext| path.ends_with(ext.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateCommit {
    pub commit_id: String,
    pub parent_id: Option<String>,
    pub author_date: NaiveDate,
    pub message: String,
    pub files_changed: Vec<String>,
    pub diff: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", content = "function", rename_all = "snake_case")]
pub enum ChangeShape {
    SingleFunctionEdit(String),
    NewFunction(String),
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reasons", rename_all = "snake_case")]
pub enum MessageQuality {
    WellFormed,
    Suspect(Vec<String>),
}

impl MessageQuality {
    pub fn is_suspect(&self) -> bool {
        matches!(self, MessageQuality::Suspect(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitTask {
    pub task_id: String,
    pub project: String,
    pub commit_id: String,
    /// Revision whose tree the candidate is built on. `None` for hand-built
    /// tasks; the project tree is then used as-is.
    #[serde(default)]
    pub base_revision: Option<String>,
    pub kind: CommitKind,
    pub message: String,
    pub message_quality: MessageQuality,
    pub context_file_path: String,
    pub context_file_pre: String,
    pub function_name: String,
    pub function_span_pre: Option<FunctionSpan>,
    pub human_function_post: String,
    #[serde(default)]
    pub human_diff: String,
    pub file_loc: usize,
    pub function_loc: usize,
    pub patch_loc: usize,
    pub author_date: NaiveDate,
}

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("repository unreadable: {0}")]
    RepoUnreadable(String),
    #[error("no commits in the selected range")]
    HistoryEmpty,
    #[error("diff does not apply: {0}")]
    DiffDoesNotApply(#[from] DiffError),
    #[error("commit {0} has no parent")]
    ParentMissing(String),
    #[error("function not locatable: {0}")]
    FunctionNotLocatable(SpliceError),
    #[error("commit {0} is not a single-function change")]
    NotSingleFunction(String),
    #[error("{path} at {rev} is not valid UTF-8")]
    NotUtf8 { rev: String, path: String },
    #[error("git: {0}")]
    Git(String),
}

/// Physical line count; a final line without a terminator still counts.
pub fn physical_lines(text: &str) -> usize {
    text.split_inclusive('\n').count()
}

/// Commits touching exactly one C file, inside the date range, newest first.
pub fn scan_history(repo_path: &Path, criteria: &SelectionCriteria) -> Result<Vec<CandidateCommit>, MinerError> {
    let git = Git::new(repo_path);
    if !git.is_repository() {
        return Err(MinerError::RepoUnreadable(format!(
            "{} is not a readable git working copy",
            repo_path.display()
        )));
    }
    if !git.has_commits() {
        return Ok(Vec::new());
    }
    let mut entries = git.log().map_err(MinerError::RepoUnreadable)?;
    entries.sort_by(|a, b| b.author_date.cmp(&a.author_date));

    let in_range: Vec<_> = entries
        .into_iter()
        .filter(|e| {
            let date = e.author_date.date_naive();
            criteria.date_range.as_ref().map_or(true, |r| r.contains(date))
        })
        .collect();
    if in_range.is_empty() {
        return Err(MinerError::HistoryEmpty);
    }

    let mut out = Vec::new();
    for e in in_range {
        if e.files.is_empty() || e.files.len() > criteria.max_files_changed {
            continue;
        }
        if !e.files.iter().all(|f| criteria.is_c_file(f)) {
            continue;
        }
        let diff = git.commit_diff(&e.id).map_err(MinerError::Git)?;
        let Ok(patch) = udiff::parse(&diff) else { continue };
        let loc = patch.changed_loc();
        if loc == 0 || loc > criteria.max_patch_loc {
            continue;
        }
        out.push(CandidateCommit {
            commit_id: e.id,
            parent_id: e.parents.first().cloned(),
            author_date: e.author_date.date_naive(),
            message: e.message,
            files_changed: e.files,
            diff,
        });
    }
    Ok(out)
}

fn owner_of_line(spans: &[FunctionSpan], line: usize) -> Option<usize> {
    spans.iter().position(|s| s.start_line <= line && line <= s.end_line)
}

/// An insertion after `line` lands inside a span only when both neighbours
/// belong to it.
fn owner_of_gap(spans: &[FunctionSpan], after_line: usize) -> Option<usize> {
    spans
        .iter()
        .position(|s| s.start_line <= after_line && after_line < s.end_line)
}

pub fn classify_change(diff: &str, pre_file: &str) -> Result<ChangeShape, MinerError> {
    let patch = udiff::parse(diff)?;
    if patch.is_empty() {
        return Ok(ChangeShape::Other);
    }
    if patch.files.len() != 1 {
        return Ok(ChangeShape::Other);
    }
    let file = &patch.files[0];
    udiff::apply(pre_file, file)?;

    let Ok(spans) = splicer::list_functions(pre_file) else {
        return Ok(ChangeShape::Other);
    };

    let mut owners = BTreeSet::new();
    let mut outside = false;
    let mut any_removed = false;
    for hunk in &file.hunks {
        let (removed, inserted_after) = hunk.change_positions();
        any_removed |= !removed.is_empty();
        for line in removed {
            match owner_of_line(&spans, line) {
                Some(i) => {
                    owners.insert(i);
                }
                None => outside = true,
            }
        }
        for after in inserted_after {
            match owner_of_gap(&spans, after) {
                Some(i) => {
                    owners.insert(i);
                }
                None => outside = true,
            }
        }
    }

    if !outside && owners.len() == 1 {
        let idx = *owners.iter().next().expect("one owner");
        return Ok(ChangeShape::SingleFunctionEdit(spans[idx].name.clone()));
    }
    if any_removed || !owners.is_empty() {
        return Ok(ChangeShape::Other);
    }

    // Pure insertion outside every existing function.
    let mut added = String::new();
    for hunk in &file.hunks {
        for l in &hunk.lines {
            if let udiff::DiffLine::Added(text) = l {
                added.push_str(text);
                added.push('\n');
            }
        }
    }
    let Ok(new_fns) = splicer::list_functions(&added) else {
        return Ok(ChangeShape::Other);
    };
    if new_fns.len() != 1 {
        return Ok(ChangeShape::Other);
    }
    let f = &new_fns[0];
    if spans.iter().any(|s| s.name == f.name) {
        return Ok(ChangeShape::Other);
    }
    // Outside the new definition only blank lines and comments are allowed.
    let residue: String = added
        .split_inclusive('\n')
        .enumerate()
        .filter(|(i, _)| !(f.start_line..=f.end_line).contains(&(i + 1)))
        .map(|(_, l)| l)
        .collect();
    if splicer::has_code(&residue) {
        return Ok(ChangeShape::Other);
    }
    Ok(ChangeShape::NewFunction(f.name.clone()))
}

fn looks_like_url(s: &str) -> bool {
    let t = s.trim();
    (t.starts_with("http://") || t.starts_with("https://")) && !t.contains(char::is_whitespace)
}

fn looks_like_issue_ref(s: &str) -> bool {
    let words: Vec<&str> = s.split_whitespace().collect();
    let is_ref = |w: &str| {
        let w = w.trim_end_matches(['.', ',', ';']);
        let digits_after = |prefix: &str| {
            w.strip_prefix(prefix)
                .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
        };
        if digits_after("#") || digits_after("GH-") || digits_after("gh-") {
            return true;
        }
        // JIRA-style KEY-123
        match w.split_once('-') {
            Some((key, num)) => {
                !key.is_empty()
                    && key.chars().all(|c| c.is_ascii_uppercase())
                    && !num.is_empty()
                    && num.chars().all(|c| c.is_ascii_digit())
            }
            None => false,
        }
    };
    let verbs = ["fix", "fixes", "fixed", "close", "closes", "closed", "see", "ref", "refs", "issue"];
    !words.is_empty()
        && words.iter().any(|w| is_ref(w))
        && words
            .iter()
            .all(|w| is_ref(w) || verbs.contains(&w.to_ascii_lowercase().trim_end_matches(':')))
}

pub fn assess_message(message: &str, min_message_tokens: usize) -> MessageQuality {
    let text = message.trim();
    if text.is_empty() {
        return MessageQuality::Suspect(vec!["empty".into()]);
    }
    if looks_like_url(text) {
        return MessageQuality::Suspect(vec!["url-only".into()]);
    }
    if looks_like_issue_ref(text) {
        return MessageQuality::Suspect(vec!["issue-ref-only".into()]);
    }
    let mut reasons = Vec::new();
    let first = text.lines().next().unwrap_or_default();
    if first.starts_with("Merge branch")
        || first.starts_with("Merge pull request")
        || first.starts_with("Merge remote-tracking branch")
        || first.starts_with("Merge tag")
    {
        reasons.push("merge-boilerplate".to_string());
    }
    if first.starts_with("Revert \"") || first.starts_with("This reverts commit") {
        reasons.push("revert-boilerplate".to_string());
    }
    let tokens = text
        .split_whitespace()
        .filter(|w| !looks_like_url(w) && w.chars().any(char::is_alphanumeric))
        .count();
    if tokens < min_message_tokens {
        reasons.push("too-few-tokens".to_string());
    }
    if reasons.is_empty() {
        MessageQuality::WellFormed
    } else {
        MessageQuality::Suspect(reasons)
    }
}

fn read_text(git: &Git, rev: &str, path: &str) -> Result<Option<String>, MinerError> {
    match git.file_at(rev, path).map_err(MinerError::Git)? {
        None => Ok(None),
        Some(bytes) => String::from_utf8(bytes).map(Some).map_err(|_| MinerError::NotUtf8 {
            rev: rev.to_string(),
            path: path.to_string(),
        }),
    }
}

pub fn materialize_task(
    repo_path: &Path,
    project: &str,
    commit: &CandidateCommit,
    criteria: &SelectionCriteria,
) -> Result<CommitTask, MinerError> {
    let git = Git::new(repo_path);
    let parent = match &commit.parent_id {
        Some(p) => p.clone(),
        None => git
            .parents(&commit.commit_id)
            .map_err(MinerError::Git)?
            .into_iter()
            .next()
            .ok_or_else(|| MinerError::ParentMissing(commit.commit_id.clone()))?,
    };
    let path = commit
        .files_changed
        .first()
        .ok_or_else(|| MinerError::NotSingleFunction(commit.commit_id.clone()))?;
    let pre = read_text(&git, &parent, path)?
        .ok_or_else(|| MinerError::NotSingleFunction(commit.commit_id.clone()))?;
    let post = read_text(&git, &commit.commit_id, path)?
        .ok_or_else(|| MinerError::NotSingleFunction(commit.commit_id.clone()))?;

    let (kind, name) = match classify_change(&commit.diff, &pre)? {
        ChangeShape::SingleFunctionEdit(n) => (CommitKind::BugFix, n),
        ChangeShape::NewFunction(n) => (CommitKind::FeatureEnhancement, n),
        ChangeShape::Other => return Err(MinerError::NotSingleFunction(commit.commit_id.clone())),
    };

    let post_span = splicer::locate_function(&post, &name).map_err(MinerError::FunctionNotLocatable)?;
    let human_function_post = splicer::extract(&post, &post_span).map_err(MinerError::FunctionNotLocatable)?;
    let (function_span_pre, function_loc) = match kind {
        CommitKind::BugFix => {
            let span = splicer::locate_function(&pre, &name).map_err(MinerError::FunctionNotLocatable)?;
            let loc = span.line_count();
            (Some(span), loc)
        }
        CommitKind::FeatureEnhancement => (None, physical_lines(&human_function_post)),
    };
    let patch_loc = udiff::parse(&commit.diff)?.changed_loc();
    let short = &commit.commit_id[..commit.commit_id.len().min(12)];

    Ok(CommitTask {
        task_id: format!("{project}-{short}"),
        project: project.to_string(),
        commit_id: commit.commit_id.clone(),
        base_revision: Some(parent),
        kind,
        message: commit.message.trim().to_string(),
        message_quality: assess_message(&commit.message, criteria.min_message_tokens),
        context_file_path: path.clone(),
        file_loc: physical_lines(&pre),
        context_file_pre: pre,
        function_name: name,
        function_span_pre,
        human_function_post,
        human_diff: commit.diff.clone(),
        function_loc,
        patch_loc,
        author_date: commit.author_date,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedCommit {
    pub commit_id: String,
    pub reason: String,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
pub struct MineOutcome {
    pub tasks: Vec<CommitTask>,
    pub skipped: Vec<SkippedCommit>,
}

/// Scan, classify and materialize in one pass. Commits that fail any stage
/// are reported in `skipped` with the reason.
pub fn mine(repo_path: &Path, project: &str, criteria: &SelectionCriteria) -> Result<MineOutcome, MinerError> {
    criteria.validate().map_err(MinerError::RepoUnreadable)?;
    let mut out = MineOutcome::default();
    for commit in scan_history(repo_path, criteria)? {
        match materialize_task(repo_path, project, &commit, criteria) {
            Ok(task) if criteria.allowed_kinds.contains(&task.kind) => out.tasks.push(task),
            Ok(task) => out.skipped.push(SkippedCommit {
                commit_id: commit.commit_id,
                reason: format!("kind {} not selected", task.kind.label()),
            }),
            Err(e) => out.skipped.push(SkippedCommit {
                commit_id: commit.commit_id,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}
