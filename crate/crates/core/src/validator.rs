//! Runs a project's test suite inside a prepared tree.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, ExecSpec};
use crate::verifier::Severity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestProfile {
    pub command: String,
    pub timeout_secs: f64,
    /// Run this project's suites one at a time (fixed ports and the like).
    pub serialize: bool,
    /// Path that must exist for the suite to be considered present.
    pub suite_path: Option<String>,
    /// Runs per evaluation; disagreeing statuses mark the outcome flaky.
    pub repeat: u32,
    /// Bytes of output kept in the outcome.
    pub log_cap: usize,
    pub env: BTreeMap<String, String>,
}

impl Default for TestProfile {
    fn default() -> Self {
        Self {
            command: "make test".into(),
            timeout_secs: 600.0,
            serialize: false,
            suite_path: None,
            repeat: 1,
            log_cap: 16 * 1024,
            env: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestStatus {
    Pass,
    Fail,
    CompileError,
    TimeoutHang,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub status: TestStatus,
    pub cases_total: Option<u64>,
    pub cases_passed: Option<u64>,
    pub duration_ms: u64,
    pub log_excerpt: String,
    #[serde(default)]
    pub flaky: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidateError {
    #[error("project has no test suite ({detail})")]
    TestSuiteMissing { detail: String },
    #[error("cannot run test command: {detail}")]
    Spawn { detail: String },
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("valid regex"))
}

/// Best-effort `(total, passed)` from common runner output.
pub fn parse_counts(log: &str) -> Option<(u64, u64)> {
    static TAP_OK: OnceLock<Regex> = OnceLock::new();
    static TAP_PLAN: OnceLock<Regex> = OnceLock::new();
    static AUTOMAKE: OnceLock<Regex> = OnceLock::new();
    static CTEST: OnceLock<Regex> = OnceLock::new();

    let automake = re(&AUTOMAKE, r"(?m)^#\s*(TOTAL|PASS|FAIL|XFAIL|XPASS|SKIP|ERROR):\s*(\d+)\s*$");
    let mut fields = BTreeMap::new();
    for c in automake.captures_iter(log) {
        fields.insert(c[1].to_string(), c[2].parse::<u64>().unwrap_or(0));
    }
    if let Some(&total) = fields.get("TOTAL") {
        let passed = fields.get("PASS").copied().unwrap_or(0) + fields.get("XFAIL").copied().unwrap_or(0);
        return Some((total, passed));
    }

    let ctest = re(&CTEST, r"(?m)\d+% tests passed, (\d+) tests? failed out of (\d+)");
    if let Some(c) = ctest.captures_iter(log).last() {
        let failed: u64 = c[1].parse().unwrap_or(0);
        let total: u64 = c[2].parse().unwrap_or(0);
        return Some((total, total.saturating_sub(failed)));
    }

    let tap = re(&TAP_OK, r"(?m)^\s*(not ok|ok)\b");
    let mut ok = 0;
    let mut not_ok = 0;
    for c in tap.captures_iter(log) {
        if &c[1] == "ok" {
            ok += 1;
        } else {
            not_ok += 1;
        }
    }
    if ok + not_ok > 0 {
        let plan = re(&TAP_PLAN, r"(?m)^\s*1\.\.(\d+)");
        let planned = plan
            .captures_iter(log)
            .map(|c| c[1].parse::<u64>().unwrap_or(0))
            .sum::<u64>();
        let total = planned.max(ok + not_ok);
        return Some((total, ok));
    }
    None
}

fn looks_like_compile_failure(log: &str, root: &Path) -> bool {
    crate::verifier::parse_compiler_output(log, root)
        .iter()
        .any(|d| d.severity == Severity::Error)
        || log.contains("undefined reference to")
}

fn run_once(workdir: &Path, profile: &TestProfile) -> Result<TestOutcome, ValidateError> {
    let timeout = Duration::from_secs_f64(profile.timeout_secs);
    let mut spec = ExecSpec::shell(&profile.command, workdir, timeout);
    spec.output_cap = profile.log_cap.max(1024) * 4;
    spec.env = profile.env.clone();
    let r = exec::run(&spec).map_err(|e| ValidateError::Spawn { detail: e.to_string() })?;
    let log = r.combined();
    let counts = parse_counts(&log);
    let status = if r.timed_out {
        TestStatus::TimeoutHang
    } else if r.code == Some(0) {
        TestStatus::Pass
    } else if looks_like_compile_failure(&log, workdir) {
        TestStatus::CompileError
    } else {
        TestStatus::Fail
    };
    // Exit status decides; counts that contradict a pass are dropped.
    let counts = match (status, counts) {
        (TestStatus::Pass, Some((t, p))) if t != p => None,
        (_, c) => c,
    };
    let excerpt = if log.len() > profile.log_cap {
        let mut cut = log.len() - profile.log_cap;
        while !log.is_char_boundary(cut) {
            cut += 1;
        }
        format!("[...]\n{}", &log[cut..])
    } else {
        log
    };
    Ok(TestOutcome {
        status,
        cases_total: counts.map(|c| c.0),
        cases_passed: counts.map(|c| c.1),
        duration_ms: r.duration_ms,
        log_excerpt: excerpt,
        flaky: false,
    })
}

pub fn run_tests(workdir: &Path, profile: &TestProfile) -> Result<TestOutcome, ValidateError> {
    if let Some(p) = &profile.suite_path {
        if !workdir.join(p).exists() {
            return Err(ValidateError::TestSuiteMissing {
                detail: format!("{p} not found in tree"),
            });
        }
    }
    let mut first = run_once(workdir, profile)?;
    for _ in 1..profile.repeat.max(1) {
        let next = run_once(workdir, profile)?;
        if next.status != first.status {
            tracing::warn!(
                workdir = %workdir.display(),
                first = ?first.status,
                other = ?next.status,
                "test suite status differs between runs"
            );
            first.flaky = true;
        }
    }
    Ok(first)
}
