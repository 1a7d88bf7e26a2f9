//! The persisted unit of a campaign: one task evaluated by one provider.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::miner::CommitTask;
use crate::prompt::Prompt;
use crate::provider::{GeneratedPatch, TokenCounts};
use crate::triage::TriageVerdict;
use crate::splicer::{SpliceMode, SpliceSite, StructuralDiff};
use crate::validator::{TestOutcome, TestStatus};
use crate::verifier::{CompileOutcome, IssueCategory, VerificationReport};

pub const SCHEMA_VERSION: u32 = 1;

pub fn record_id(task_id: &str, provider_id: &str) -> String {
    format!("{task_id}:{provider_id}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "value", rename_all = "snake_case")]
pub enum Stage<T> {
    Done(T),
    Skipped(String),
}

impl<T> Stage<T> {
    pub fn done(&self) -> Option<&T> {
        match self {
            Stage::Done(t) => Some(t),
            Stage::Skipped(_) => None,
        }
    }

    pub fn skipped_reason(&self) -> Option<&str> {
        match self {
            Stage::Done(_) => None,
            Stage::Skipped(r) => Some(r),
        }
    }
}

pub const SKIP_EMPTY_PARTIAL: &str = "empty-partial";
pub const SKIP_CONTEXT_OVERFLOW: &str = "context-overflow";
pub const SKIP_NO_RESPONSE: &str = "no-response";
pub const SKIP_COMPILE_FAILED: &str = "compile-failed";
pub const SKIP_NO_SUITE: &str = "no-test-suite";
pub const SKIP_SPLICE_FAILED: &str = "splice-failed";
pub const SKIP_INFRA: &str = "infrastructure-error";

/// Provider output metadata; the text itself lives in the raw store.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResponseMeta {
    pub latency_ms: u64,
    pub truncated: bool,
    pub token_counts: TokenCounts,
    pub citations: Vec<String>,
    pub request: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpliceSummary {
    pub mode: SpliceMode,
    pub site: SpliceSite,
    pub structural_diff: Option<StructuralDiff>,
}

/// Failures of the harness or the environment, as opposed to properties of
/// the candidate patch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MachineFlags {
    pub context_overflow: bool,
    pub provider_error: Option<String>,
    pub no_code_found: bool,
    pub splice_error: Option<String>,
    pub analyzer_crash: bool,
    pub verify_error: Option<String>,
    pub baseline_error: Option<String>,
    pub test_suite_missing: bool,
    pub test_error: Option<String>,
    pub workdir_error: Option<String>,
    pub flaky_tests: bool,
    pub format_hint: bool,
    /// Working directory kept for debugging.
    pub retained_workdir: Option<String>,
}

impl MachineFlags {
    /// Something went wrong that a rerun in a fixed environment could change.
    pub fn infrastructure_failure(&self) -> bool {
        self.provider_error.is_some()
            || self.verify_error.is_some()
            || self.baseline_error.is_some()
            || self.test_error.is_some()
            || self.workdir_error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub schema_version: u32,
    pub task: CommitTask,
    pub provider_id: String,
    pub model_name: String,
    pub prompt: Prompt,
    /// Path of the raw response text relative to the store root.
    pub raw_response_ref: Option<String>,
    pub response: Option<ResponseMeta>,
    pub patch: Option<GeneratedPatch>,
    pub splice: Option<SpliceSummary>,
    /// Unified diff of the context file, pre-commit to candidate.
    pub candidate_diff: Option<String>,
    pub verification: Stage<VerificationReport>,
    pub validation: Stage<TestOutcome>,
    pub machine_flags: MachineFlags,
    /// Triage verdicts joined in at analysis time; empty in the run store.
    #[serde(default)]
    pub verdicts: Vec<TriageVerdict>,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub stage_ms: BTreeMap<String, u64>,
}

impl EvaluationRecord {
    pub fn id(&self) -> String {
        record_id(&self.task.task_id, &self.provider_id)
    }

    /// Empty, partial, or no code at all.
    pub fn empty_partial(&self) -> bool {
        self.machine_flags.no_code_found || self.patch.as_ref().is_some_and(|p| p.is_empty || p.is_partial)
    }

    pub fn compile_outcome(&self) -> Option<&CompileOutcome> {
        self.verification.done().map(|v| &v.compile_outcome)
    }

    pub fn test_status(&self) -> Option<TestStatus> {
        self.validation.done().map(|t| t.status)
    }

    /// Candidate issue counts per category, `EmptyPartial` included.
    pub fn issue_counts(&self) -> BTreeMap<IssueCategory, usize> {
        let mut m: BTreeMap<IssueCategory, usize> = IssueCategory::ALL.iter().map(|c| (*c, 0)).collect();
        if let Some(v) = self.verification.done() {
            for i in &v.issues {
                *m.entry(i.category).or_default() += 1;
            }
        }
        if self.empty_partial() {
            m.insert(IssueCategory::EmptyPartial, 1);
        }
        m
    }

    /// Canonical form for hashing: wall-clock fields zeroed and raw tool
    /// logs dropped (compilers name their temporaries at random).
    pub fn canonical(&self) -> EvaluationRecord {
        let mut r = self.clone();
        if let Stage::Done(v) = &mut r.verification {
            v.build_log.clear();
        }
        r.created_at = DateTime::<Utc>::UNIX_EPOCH;
        r.stage_ms.clear();
        if let Some(resp) = &mut r.response {
            resp.latency_ms = 0;
        }
        if let Stage::Done(t) = &mut r.validation {
            t.duration_ms = 0;
            t.log_excerpt.clear();
        }
        r.machine_flags.retained_workdir = None;
        r.verdicts.clear();
        r
    }
}
