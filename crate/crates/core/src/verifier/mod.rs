//! Build and static analysis of a prepared tree, with diagnostics mapped onto
//! the issue taxonomy and compared against the human baseline tree.

mod categorize;
mod diagnostics;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, ExecSpec};

pub use categorize::{categorize, has_explicit_rule, IssueCategory, FRONTEND_PREFIX};

const CHECKERS_TOML: &str = include_str!("../../config/analyzer-checkers.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    pub tool: String,
    pub checker_id: String,
    pub message: String,
    /// Relative to the tree root when the file lies inside it.
    pub file: String,
    pub line: usize,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorizedIssue {
    pub diagnostic: Diagnostic,
    pub category: IssueCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CompileOutcome {
    Success,
    CompileError { messages: Vec<String> },
}

impl CompileOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, CompileOutcome::Success)
    }
}

/// The analyzer checker list pinned in `config/analyzer-checkers.toml`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckerSet {
    pub analyzer: String,
    pub pinned_version: String,
    pub default: Vec<String>,
    pub extra: Vec<String>,
}

impl CheckerSet {
    pub fn pinned() -> Self {
        toml::from_str(CHECKERS_TOML).expect("bundled checker list parses")
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn enabled(&self) -> impl Iterator<Item = &str> {
        self.default.iter().chain(&self.extra).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildProfile {
    pub configure: Option<String>,
    pub command: String,
    pub timeout_secs: f64,
    pub env: BTreeMap<String, String>,
}

impl Default for BuildProfile {
    fn default() -> Self {
        Self {
            configure: None,
            command: "make".into(),
            timeout_secs: 600.0,
            env: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzerProfile {
    pub clang: String,
    /// Translation units or directories, relative to the tree. Empty means
    /// every `.c` file in the tree.
    pub sources: Vec<String>,
    pub include_dirs: Vec<String>,
    pub defines: Vec<String>,
    pub extra_args: Vec<String>,
    /// Replaces the bundled checker list when set.
    pub checkers_file: Option<PathBuf>,
    pub disabled_checkers: Vec<String>,
    pub timeout_secs: f64,
    /// Also collect compiler warnings with a separate syntax-only pass.
    pub frontend_pass: bool,
}

impl Default for AnalyzerProfile {
    fn default() -> Self {
        Self {
            clang: "clang".into(),
            sources: Vec::new(),
            include_dirs: Vec::new(),
            defines: Vec::new(),
            extra_args: Vec::new(),
            checkers_file: None,
            disabled_checkers: Vec::new(),
            timeout_secs: 600.0,
            frontend_pass: true,
        }
    }
}

impl AnalyzerProfile {
    pub fn checker_set(&self) -> Result<CheckerSet, String> {
        match &self.checkers_file {
            Some(p) => CheckerSet::load(p),
            None => Ok(CheckerSet::pinned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyProfiles {
    pub build: BuildProfile,
    pub analyzer: AnalyzerProfile,
    pub checkers: CheckerSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerifyError {
    #[error("build tool missing: {detail}")]
    BuildToolMissing { detail: String },
    #[error("build timed out after {seconds}s")]
    BuildTimeout { seconds: u64 },
    #[error("analyzer missing: {detail}")]
    AnalyzerMissing { detail: String },
    #[error("i/o error: {detail}")]
    Io { detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildResult {
    pub outcome: CompileOutcome,
    pub log: String,
    /// Compiler diagnostics found in the build output.
    pub diagnostics: Vec<Diagnostic>,
    pub duration_ms: u64,
}

pub fn build_tree(workdir: &Path, profile: &BuildProfile) -> Result<BuildResult, VerifyError> {
    let timeout = Duration::from_secs_f64(profile.timeout_secs);
    let mut log = String::new();
    let mut duration_ms = 0;
    let steps = profile.configure.iter().chain(std::iter::once(&profile.command));
    for command in steps {
        let mut spec = ExecSpec::shell(command, workdir, timeout);
        spec.env = profile.env.clone();
        let r = exec::run(&spec).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => VerifyError::BuildToolMissing { detail: e.to_string() },
            _ => VerifyError::Io { detail: e.to_string() },
        })?;
        duration_ms += r.duration_ms;
        log.push_str(&r.combined());
        if r.timed_out {
            return Err(VerifyError::BuildTimeout {
                seconds: timeout.as_secs(),
            });
        }
        if r.code == Some(127) {
            return Err(VerifyError::BuildToolMissing {
                detail: r.stderr.text.trim().to_string(),
            });
        }
        if !r.success() {
            let diagnostics = dedup(diagnostics::parse_text(&log, workdir, false));
            let mut messages: Vec<String> = diagnostics
                .iter()
                .filter(|d| d.severity == Severity::Error)
                .map(|d| format!("{}:{}: {}", d.file, d.line, d.message))
                .collect();
            if messages.is_empty() {
                messages.push(
                    log.lines()
                        .rev()
                        .find(|l| !l.trim().is_empty())
                        .unwrap_or("build failed")
                        .to_string(),
                );
            }
            return Ok(BuildResult {
                outcome: CompileOutcome::CompileError { messages },
                log,
                diagnostics,
                duration_ms,
            });
        }
    }
    let diagnostics = dedup(diagnostics::parse_text(&log, workdir, false));
    Ok(BuildResult {
        outcome: CompileOutcome::Success,
        log,
        diagnostics,
        duration_ms,
    })
}

/// Compiler diagnostics in free-form build or test output.
pub fn parse_compiler_output(text: &str, root: &Path) -> Vec<Diagnostic> {
    diagnostics::parse_text(text, root, false)
}

fn collect_c_files(dir: &Path, root: &Path, out: &mut Vec<String>) -> std::io::Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let name = e.file_name();
        if name.to_string_lossy().starts_with('.') {
            continue;
        }
        let path = e.path();
        let ft = e.file_type()?;
        if ft.is_dir() {
            collect_c_files(&path, root, out)?;
        } else if ft.is_file() && path.extension().is_some_and(|x| x == "c") {
            out.push(path.strip_prefix(root).unwrap_or(&path).to_string_lossy().into_owned());
        }
    }
    Ok(())
}

/// Translation units named by the profile, relative to `workdir`.
pub fn translation_units(workdir: &Path, profile: &AnalyzerProfile) -> Result<Vec<String>, VerifyError> {
    let io = |e: std::io::Error| VerifyError::Io { detail: e.to_string() };
    let mut out = Vec::new();
    if profile.sources.is_empty() {
        collect_c_files(workdir, workdir, &mut out).map_err(io)?;
    } else {
        for s in &profile.sources {
            let p = workdir.join(s);
            if p.is_dir() {
                collect_c_files(&p, workdir, &mut out).map_err(io)?;
            } else if p.is_file() {
                out.push(s.clone());
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub diagnostics: Vec<Diagnostic>,
    /// Analyzer crashes and per-unit failures; recorded, never fatal.
    pub failures: Vec<String>,
}

fn dedup(mut d: Vec<Diagnostic>) -> Vec<Diagnostic> {
    let mut seen = BTreeSet::new();
    d.sort_by(|a, b| {
        (&a.file, a.line, &a.checker_id, &a.message).cmp(&(&b.file, b.line, &b.checker_id, &b.message))
    });
    d.retain(|x| seen.insert((x.checker_id.clone(), x.file.clone(), x.line, x.message.clone())));
    d
}

fn common_args(profile: &AnalyzerProfile) -> Vec<String> {
    let mut args = vec!["-fno-color-diagnostics".to_string()];
    args.extend(profile.include_dirs.iter().map(|d| format!("-I{d}")));
    args.extend(profile.defines.iter().map(|d| format!("-D{d}")));
    args.extend(profile.extra_args.iter().cloned());
    args
}

pub fn analyze_tree(
    workdir: &Path,
    profile: &AnalyzerProfile,
    checkers: &CheckerSet,
) -> Result<AnalysisResult, VerifyError> {
    let timeout = Duration::from_secs_f64(profile.timeout_secs);
    let units = translation_units(workdir, profile)?;
    let out_dir = tempfile::tempdir().map_err(|e| VerifyError::Io { detail: e.to_string() })?;
    let mut result = AnalysisResult::default();
    let missing = |e: std::io::Error| match e.kind() {
        std::io::ErrorKind::NotFound => VerifyError::AnalyzerMissing {
            detail: format!("{}: {e}", profile.clang),
        },
        _ => VerifyError::Io { detail: e.to_string() },
    };

    for (i, unit) in units.iter().enumerate() {
        if profile.frontend_pass {
            let mut args = vec!["-fsyntax-only".to_string(), "-fno-caret-diagnostics".to_string()];
            args.extend(common_args(profile));
            args.push(unit.clone());
            let r = exec::run(&ExecSpec::argv(&profile.clang, &args, workdir, timeout)).map_err(missing)?;
            result
                .diagnostics
                .extend(diagnostics::parse_text(&r.stderr.text, workdir, false));
            if r.timed_out {
                result.failures.push(format!("{unit}: front-end pass timed out"));
            }
        }

        let sarif = out_dir.path().join(format!("{i}.sarif"));
        let mut args = vec![
            "--analyze".to_string(),
            "--analyzer-output".to_string(),
            "sarif".to_string(),
            "-o".to_string(),
            sarif.to_string_lossy().into_owned(),
        ];
        args.extend(common_args(profile));
        for c in &checkers.extra {
            args.push("-Xanalyzer".into());
            args.push(format!("-analyzer-checker={c}"));
        }
        for c in &profile.disabled_checkers {
            args.push("-Xanalyzer".into());
            args.push(format!("-analyzer-disable-checker={c}"));
        }
        args.push(unit.clone());
        let r = exec::run(&ExecSpec::argv(&profile.clang, &args, workdir, timeout)).map_err(missing)?;
        if r.timed_out {
            result.failures.push(format!("{unit}: analyzer timed out"));
            continue;
        }
        if let Some(sig) = r.signal {
            result.failures.push(format!("{unit}: analyzer crashed with signal {sig}"));
        } else if r.code != Some(0) {
            let first = r.stderr.text.lines().find(|l| l.contains("error")).unwrap_or("").to_string();
            result
                .failures
                .push(format!("{unit}: analyzer exited with {:?} {first}", r.code));
        }
        let parsed = std::fs::read_to_string(&sarif)
            .map_err(|e| e.to_string())
            .and_then(|t| diagnostics::parse_sarif(&t, workdir));
        match parsed {
            Ok(d) => result.diagnostics.extend(d),
            // No usable structured output: fall back to the text stream.
            Err(_) => result
                .diagnostics
                .extend(diagnostics::parse_text(&r.stderr.text, workdir, true)),
        }
    }
    result.diagnostics = dedup(result.diagnostics);
    Ok(result)
}

/// Build outcome plus categorized findings for one tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeAnalysis {
    pub compile_outcome: CompileOutcome,
    pub issues: Vec<CategorizedIssue>,
    pub uncategorized: Vec<Diagnostic>,
    pub analyzer_failures: Vec<String>,
    pub build_log: String,
}

impl TreeAnalysis {
    pub fn count(&self, category: IssueCategory) -> usize {
        self.issues.iter().filter(|i| i.category == category).count()
    }
}

fn split_categories(diags: Vec<Diagnostic>) -> (Vec<CategorizedIssue>, Vec<Diagnostic>) {
    let mut issues = Vec::new();
    let mut uncategorized = Vec::new();
    for d in diags {
        match categorize(&d) {
            Some(category) => issues.push(CategorizedIssue { diagnostic: d, category }),
            None => uncategorized.push(d),
        }
    }
    (issues, uncategorized)
}

/// Build, and when the build succeeds, analyze. A failed build contributes
/// only the compiler diagnostics from its log.
pub fn analyze(workdir: &Path, profiles: &VerifyProfiles) -> Result<TreeAnalysis, VerifyError> {
    let build = build_tree(workdir, &profiles.build)?;
    let (diags, failures) = if build.outcome.is_success() {
        let a = analyze_tree(workdir, &profiles.analyzer, &profiles.checkers)?;
        (a.diagnostics, a.failures)
    } else {
        (build.diagnostics.clone(), Vec::new())
    };
    let (issues, uncategorized) = split_categories(diags);
    Ok(TreeAnalysis {
        compile_outcome: build.outcome,
        issues,
        uncategorized,
        analyzer_failures: failures,
        build_log: build.log,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub compile_outcome: CompileOutcome,
    pub issues: Vec<CategorizedIssue>,
    pub uncategorized: Vec<Diagnostic>,
    pub baseline_issues: Vec<CategorizedIssue>,
    pub baseline_uncategorized: Vec<Diagnostic>,
    /// Candidate minus baseline, for every category.
    pub issue_delta: BTreeMap<IssueCategory, i64>,
    pub uncategorized_delta: i64,
    pub analyzer_failures: Vec<String>,
    #[serde(default)]
    pub build_log: String,
}

impl VerificationReport {
    pub fn count(&self, category: IssueCategory) -> usize {
        self.issues.iter().filter(|i| i.category == category).count()
    }
}

fn delta(candidate: &[CategorizedIssue], baseline: &[CategorizedIssue]) -> BTreeMap<IssueCategory, i64> {
    IssueCategory::ALL
        .iter()
        .map(|&c| {
            let n = |v: &[CategorizedIssue]| v.iter().filter(|i| i.category == c).count() as i64;
            (c, n(candidate) - n(baseline))
        })
        .collect()
}

/// Compare an analyzed candidate with an analyzed (possibly cached) baseline.
pub fn compare(candidate: TreeAnalysis, baseline: &TreeAnalysis) -> VerificationReport {
    let issue_delta = delta(&candidate.issues, &baseline.issues);
    VerificationReport {
        compile_outcome: candidate.compile_outcome,
        uncategorized_delta: candidate.uncategorized.len() as i64 - baseline.uncategorized.len() as i64,
        issues: candidate.issues,
        uncategorized: candidate.uncategorized,
        baseline_issues: baseline.issues.clone(),
        baseline_uncategorized: baseline.uncategorized.clone(),
        issue_delta,
        analyzer_failures: candidate.analyzer_failures,
        build_log: candidate.build_log,
    }
}

pub fn verify(candidate: &Path, baseline: &Path, profiles: &VerifyProfiles) -> Result<VerificationReport, VerifyError> {
    let base = analyze(baseline, profiles)?;
    let cand = analyze(candidate, profiles)?;
    Ok(compare(cand, &base))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profiles(sources: &[&str]) -> VerifyProfiles {
        VerifyProfiles {
            build: BuildProfile {
                command: "cc -c -Werror=implicit-function-declaration -o /dev/null *.c".into(),
                ..Default::default()
            },
            analyzer: AnalyzerProfile {
                sources: sources.iter().map(|s| s.to_string()).collect(),
                timeout_secs: 120.0,
                ..Default::default()
            },
            checkers: CheckerSet::pinned(),
        }
    }

    fn tree(files: &[(&str, &str)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (name, text) in files {
            std::fs::write(dir.path().join(name), text).unwrap();
        }
        dir
    }

    const CLEAN: &str = "#include <stdio.h>\nint main(void)\n{\n    puts(\"hello\");\n    return 0;\n}\n";
    const NULL_DEREF: &str = "int main(void)\n{\n    int *p = 0;\n    *p = 1;\n    return 0;\n}\n";

    #[test]
    fn every_enabled_checker_has_a_rule() {
        let set = CheckerSet::pinned();
        let missing: Vec<_> = set.enabled().filter(|c| !has_explicit_rule(c)).collect();
        assert!(missing.is_empty(), "checkers without a rule: {missing:?}");
        assert!(set.extra.contains(&"alpha.unix.cstring.OutOfBounds".to_string()));
        assert!(set.extra.contains(&"alpha.core.CastToStruct".to_string()));
    }

    #[test]
    fn clean_tree_has_no_diagnostics() {
        let t = tree(&[("hello.c", CLEAN)]);
        let p = profiles(&[]);
        let a = analyze_tree(t.path(), &p.analyzer, &p.checkers).unwrap();
        assert!(a.diagnostics.is_empty(), "{:?}", a.diagnostics);
        assert!(a.failures.is_empty());
    }

    #[test]
    fn null_dereference_is_pinned() {
        let t = tree(&[("bad.c", NULL_DEREF)]);
        let p = profiles(&[]);
        let a = analyze_tree(t.path(), &p.analyzer, &p.checkers).unwrap();
        assert_eq!(a.diagnostics.len(), 1, "{:?}", a.diagnostics);
        let d = &a.diagnostics[0];
        assert_eq!(d.checker_id, "core.NullDereference");
        assert_eq!(d.file, "bad.c");
        assert_eq!(d.line, 4);
        assert_eq!(categorize(d), Some(IssueCategory::NullDereference));
        // Stable on re-run.
        let again = analyze_tree(t.path(), &p.analyzer, &p.checkers).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn delta_against_clean_baseline() {
        let base = tree(&[("m.c", CLEAN)]);
        let cand = tree(&[("m.c", NULL_DEREF)]);
        let p = profiles(&[]);
        let r = verify(cand.path(), base.path(), &p).unwrap();
        assert!(r.compile_outcome.is_success());
        assert_eq!(r.issue_delta[&IssueCategory::NullDereference], 1);
        assert_eq!(r.issue_delta.values().filter(|v| **v != 0).count(), 1);

        let same = verify(base.path(), base.path(), &p).unwrap();
        assert!(same.issue_delta.values().all(|v| *v == 0));
    }

    #[test]
    fn undeclared_call_fails_the_build() {
        let src = "unsigned int size(void)\n{\n    return hashtable_size(0);\n}\n";
        let t = tree(&[("v.c", src)]);
        let b = build_tree(t.path(), &profiles(&[]).build).unwrap();
        let CompileOutcome::CompileError { messages } = &b.outcome else { panic!("{:?}", b.outcome) };
        assert!(messages.iter().any(|m| m.contains("hashtable_size")), "{messages:?}");
        assert!(b
            .diagnostics
            .iter()
            .any(|d| categorize(d) == Some(IssueCategory::UndeclaredIdentifier)));
    }

    #[test]
    fn missing_build_tool_and_empty_tree() {
        let t = tree(&[]);
        let missing = BuildProfile {
            command: "definitely-not-a-build-tool-xyz".into(),
            ..Default::default()
        };
        assert!(matches!(build_tree(t.path(), &missing), Err(VerifyError::BuildToolMissing { .. })));
        let make = build_tree(t.path(), &BuildProfile::default());
        assert!(matches!(
            make,
            Ok(BuildResult { outcome: CompileOutcome::CompileError { .. }, .. }) | Err(VerifyError::BuildToolMissing { .. })
        ));
    }

    #[test]
    fn build_timeout() {
        let t = tree(&[]);
        let slow = BuildProfile {
            command: "sleep 30".into(),
            timeout_secs: 0.3,
            ..Default::default()
        };
        assert!(matches!(build_tree(t.path(), &slow), Err(VerifyError::BuildTimeout { .. })));
    }
}
