//! A small deterministic corpus: seven two-revision C mini-projects with
//! recorded responses from three simulated providers and the outcome each
//! response is expected to produce.
//!
//! `build_fixture_corpus` writes the git repositories, the replay response
//! directories, a campaign config and `manifest.json` into one directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::miner::{self, CommitKind, SelectionCriteria};
use crate::record::{record_id, EvaluationRecord, Stage, SKIP_COMPILE_FAILED, SKIP_EMPTY_PARTIAL};
use crate::triage::{suggest_category, VerdictCategory};
use crate::validator::TestStatus;
use crate::verifier::{CompileOutcome, IssueCategory};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "campaign.toml";
pub const PROVIDERS: [&str; 3] = ["sim-g", "sim-m", "sim-q"];

/// Seeded single-defect programs for analyzer goldens, with the category
/// each one must produce.
pub const DEFECTS: [(&str, &str, IssueCategory); 3] = [
    ("null_deref.c", include_str!("../fixtures/defects/null_deref.c"), IssueCategory::NullDereference),
    ("use_after_free.c", include_str!("../fixtures/defects/use_after_free.c"), IssueCategory::UseAfterFree),
    ("uninitialized.c", include_str!("../fixtures/defects/uninitialized.c"), IssueCategory::UninitializedVariable),
];

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("output directory {path} is not writable: {detail}")]
    OutDirNotWritable { path: String, detail: String },
    #[error("git failed while building {case}: {detail}")]
    Git { case: String, detail: String },
    #[error("case {case}: {detail}")]
    Mining { case: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedCompile {
    Success,
    CompileError,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "value")]
pub enum ExpectedTest {
    Ran(TestStatus),
    Skipped(String),
}

/// The machine-observable part of a record that the corpus pins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub compile: ExpectedCompile,
    /// Nonzero baseline deltas, plus `EmptyPartial` when the patch is empty,
    /// partial or missing.
    pub issues: BTreeMap<IssueCategory, i64>,
    pub test: ExpectedTest,
    pub suggested: Option<VerdictCategory>,
}

impl Outcome {
    pub fn observe(record: &EvaluationRecord) -> Outcome {
        let compile = match record.compile_outcome() {
            Some(CompileOutcome::Success) => ExpectedCompile::Success,
            Some(CompileOutcome::CompileError { .. }) => ExpectedCompile::CompileError,
            None => ExpectedCompile::Skipped,
        };
        let mut issues: BTreeMap<IssueCategory, i64> = record
            .verification
            .done()
            .map(|v| v.issue_delta.iter().filter(|(_, d)| **d != 0).map(|(c, d)| (*c, *d)).collect())
            .unwrap_or_default();
        if record.empty_partial() {
            issues.insert(IssueCategory::EmptyPartial, 1);
        }
        let test = match &record.validation {
            Stage::Done(t) => ExpectedTest::Ran(t.status),
            Stage::Skipped(r) => ExpectedTest::Skipped(r.clone()),
        };
        Outcome {
            compile,
            issues,
            test,
            suggested: suggest_category(record),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub provider_id: String,
    pub record_id: String,
    /// What the recorded response does, in a few words.
    pub response: String,
    pub outcome: Outcome,
    /// The verdict a reviewer is expected to give.
    pub verdict: VerdictCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestCase {
    pub name: String,
    pub project: String,
    pub task_id: String,
    pub commit_id: String,
    pub kind: CommitKind,
    pub context_file: String,
    /// Repository path relative to the corpus root.
    pub repo: String,
    pub expectations: Vec<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: String,
    pub providers: Vec<String>,
    pub cases: Vec<ManifestCase>,
}

impl Manifest {
    pub fn load(dir: &Path) -> std::io::Result<Manifest> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    pub fn expectations(&self) -> impl Iterator<Item = (&ManifestCase, &Expectation)> {
        self.cases.iter().flat_map(|c| c.expectations.iter().map(move |e| (c, e)))
    }
}

struct Response {
    provider: &'static str,
    text: &'static str,
    what: &'static str,
    outcome: fn() -> Outcome,
    verdict: VerdictCategory,
}

struct Case {
    name: &'static str,
    file: &'static str,
    tree: &'static [(&'static str, &'static str)],
    post: &'static str,
    message: &'static str,
    date: &'static str,
    responses: [Response; 3],
}

macro_rules! tree {
    ($case:literal: $($file:literal),+) => {
        &[$(($file, include_str!(concat!("../fixtures/cases/", $case, "/tree/", $file)))),+]
    };
}

macro_rules! response {
    ($case:literal, $provider:literal, $what:literal, $outcome:expr, $verdict:ident) => {
        Response {
            provider: $provider,
            text: include_str!(concat!("../fixtures/cases/", $case, "/", $provider, ".txt")),
            what: $what,
            outcome: $outcome,
            verdict: VerdictCategory::$verdict,
        }
    };
}

fn issues(list: &[(IssueCategory, i64)]) -> BTreeMap<IssueCategory, i64> {
    list.iter().copied().collect()
}

fn passes() -> Outcome {
    Outcome {
        compile: ExpectedCompile::Success,
        issues: BTreeMap::new(),
        test: ExpectedTest::Ran(TestStatus::Pass),
        suggested: None,
    }
}

fn identical() -> Outcome {
    Outcome {
        suggested: Some(VerdictCategory::IdenticalToHuman),
        ..passes()
    }
}

fn unchanged() -> Outcome {
    Outcome {
        compile: ExpectedCompile::Skipped,
        issues: issues(&[(IssueCategory::EmptyPartial, 1)]),
        test: ExpectedTest::Skipped(SKIP_EMPTY_PARTIAL.into()),
        suggested: Some(VerdictCategory::EmptyPatch),
    }
}

fn incomplete() -> Outcome {
    Outcome {
        suggested: None,
        ..unchanged()
    }
}

fn undeclared() -> Outcome {
    Outcome {
        compile: ExpectedCompile::CompileError,
        issues: issues(&[(IssueCategory::UndeclaredIdentifier, 1)]),
        test: ExpectedTest::Skipped(SKIP_COMPILE_FAILED.into()),
        suggested: Some(VerdictCategory::UncompilableUndeclared),
    }
}

fn freed_then_used(n: i64) -> Outcome {
    Outcome {
        issues: issues(&[(IssueCategory::UseAfterFree, n)]),
        ..passes()
    }
}

fn cases() -> Vec<Case> {
    vec![
        Case {
            name: "deque",
            file: "deque.c",
            tree: tree!("deque": "Makefile", "deque.h", "deque.c", "test_main.c"),
            post: include_str!("../fixtures/cases/deque/post.c"),
            message: "Read the element at the wrapped position in deque_remove_at",
            date: "2024-03-12T10:00:00Z",
            responses: [
                response!("deque", "sim-g", "uses a member the struct lacks", undeclared, UncompilableUndeclared),
                response!("deque", "sim-m", "same as the human fix", identical, IdenticalToHuman),
                response!("deque", "sim-q", "returns the function unchanged", unchanged, EmptyPatch),
            ],
        },
        Case {
            name: "parser",
            file: "parser.c",
            tree: tree!("parser": "Makefile", "parser.h", "parser.c", "test_main.c"),
            post: include_str!("../fixtures/cases/parser/post.c"),
            message: "Report the duplicate key error before releasing the key buffer",
            date: "2024-05-20T10:00:00Z",
            responses: [
                response!("parser", "sim-g", "decrefs the value it no longer owns, key still read after free", || freed_then_used(2), WrongSolution),
                response!("parser", "sim-m", "releases the object, key still read after free", || freed_then_used(1), WrongSolution),
                response!("parser", "sim-q", "returns the function unchanged", unchanged, EmptyPatch),
            ],
        },
        Case {
            name: "hashtable",
            file: "hashtable.c",
            tree: tree!("hashtable": "Makefile", "hashtable.h", "hashtable.c", "test_main.c"),
            post: include_str!("../fixtures/cases/hashtable/post.c"),
            message: "Skip the NULL key slot when looking for a key to replace",
            date: "2024-08-02T10:00:00Z",
            responses: [
                response!("hashtable", "sim-g", "returns the function unchanged", unchanged, EmptyPatch),
                response!("hashtable", "sim-m", "cut off in the middle of the function", incomplete, WrongSolution),
                response!("hashtable", "sim-q", "same as the human fix", identical, IdenticalToHuman),
            ],
        },
        Case {
            name: "objsize",
            file: "value.c",
            tree: tree!("objsize": "Makefile", "jansson.h", "value.c", "test_main.c"),
            post: include_str!("../fixtures/cases/objsize/post.c"),
            message: "Add json_object_size to report the number of members",
            date: "2024-11-15T10:00:00Z",
            responses: [
                response!("objsize", "sim-g", "calls an undeclared helper", undeclared, UncompilableUndeclared),
                response!("objsize", "sim-m", "calls an undeclared helper", undeclared, UncompilableUndeclared),
                response!("objsize", "sim-q", "reads a member the table lacks", undeclared, UncompilableUndeclared),
            ],
        },
        Case {
            name: "strndup",
            file: "memory.c",
            tree: tree!("strndup": "Makefile", "jansson_private.h", "memory.c", "test_main.c"),
            post: include_str!("../fixtures/cases/strndup/post.c"),
            message: "Guard jsonp_strndup against a length that overflows the allocation",
            date: "2025-01-09T10:00:00Z",
            responses: [
                response!("strndup", "sim-g", "different but equivalent overflow check", passes, DifferentAppearsCorrect),
                response!("strndup", "sim-m", "same as the human fix", identical, IdenticalToHuman),
                response!("strndup", "sim-q", "explains the fix without code", incomplete, EmptyPatch),
            ],
        },
        Case {
            name: "escape",
            file: "utility.c",
            tree: tree!("escape": "Makefile", "utility.h", "utility.c", "test_main.c"),
            post: include_str!("../fixtures/cases/escape/post.c"),
            message: "Decode escaped backslashes in unescape_string",
            date: "2025-03-27T10:00:00Z",
            responses: [
                response!(
                    "escape",
                    "sim-g",
                    "adds the case but drops three others",
                    || Outcome {
                        test: ExpectedTest::Ran(TestStatus::Fail),
                        ..passes()
                    },
                    DeletedUnrelatedCode
                ),
                response!(
                    "escape",
                    "sim-m",
                    "whole file without an unrelated function",
                    || Outcome {
                        compile: ExpectedCompile::CompileError,
                        issues: BTreeMap::new(),
                        test: ExpectedTest::Skipped(SKIP_COMPILE_FAILED.into()),
                        suggested: Some(VerdictCategory::DeletedUnrelatedCode),
                    },
                    DeletedUnrelatedCode
                ),
                response!("escape", "sim-q", "same as the human fix", identical, IdenticalToHuman),
            ],
        },
        Case {
            name: "refcount",
            file: "linklist.c",
            tree: tree!("refcount": "Makefile", "linklist.h", "linklist.c", "test_main.c"),
            post: include_str!("../fixtures/cases/refcount/post.c"),
            message: "Drop the node references list_insert holds on every exit path",
            date: "2025-06-18T10:00:00Z",
            responses: [
                response!("refcount", "sim-g", "releases one of the two references", passes, PartialFix),
                response!("refcount", "sim-m", "same as the human fix", identical, IdenticalToHuman),
                response!("refcount", "sim-q", "cut off in the middle of the function", incomplete, WrongSolution),
            ],
        },
    ]
}

const BASE_DATE: &str = "2024-01-10T09:00:00Z";

fn git(case: &str, repo: &Path, args: &[&str], date: &str) -> Result<String, FixtureError> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .env("GIT_AUTHOR_NAME", "Fixture Author")
        .env("GIT_AUTHOR_EMAIL", "author@fixtures.invalid")
        .env("GIT_COMMITTER_NAME", "Fixture Author")
        .env("GIT_COMMITTER_EMAIL", "author@fixtures.invalid")
        .env("GIT_AUTHOR_DATE", date)
        .env("GIT_COMMITTER_DATE", date)
        .env("GIT_CONFIG_GLOBAL", "/dev/null")
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .output()
        .map_err(|e| FixtureError::Git {
            case: case.into(),
            detail: e.to_string(),
        })?;
    if !out.status.success() {
        return Err(FixtureError::Git {
            case: case.into(),
            detail: format!("git {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()),
        });
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write(path: &Path, text: &str) -> Result<(), FixtureError> {
    let fail = |e: std::io::Error| FixtureError::OutDirNotWritable {
        path: path.display().to_string(),
        detail: e.to_string(),
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(fail)?;
    }
    std::fs::write(path, text).map_err(fail)
}

fn build_repo(case: &Case, repo: &Path) -> Result<(), FixtureError> {
    if repo.exists() {
        std::fs::remove_dir_all(repo).map_err(|e| FixtureError::OutDirNotWritable {
            path: repo.display().to_string(),
            detail: e.to_string(),
        })?;
    }
    for (name, text) in case.tree {
        write(&repo.join(name), text)?;
    }
    git(case.name, repo, &["init", "-q", "-b", "main"], BASE_DATE)?;
    git(case.name, repo, &["add", "."], BASE_DATE)?;
    git(case.name, repo, &["commit", "-q", "-m", "Initial import"], BASE_DATE)?;
    write(&repo.join(case.file), case.post)?;
    git(case.name, repo, &["add", case.file], case.date)?;
    git(case.name, repo, &["commit", "-q", "-m", case.message], case.date)?;
    Ok(())
}

fn config_text(cases: &[Case]) -> String {
    let mut s = String::from(
        "# Fixture campaign. Paths are relative to this file.\n\
         [campaign]\n\
         name = \"fixtures\"\n\
         store = \"store\"\n\
         workers = 4\n\
         reviewers = [\"reviewer-a\", \"reviewer-b\"]\n\n",
    );
    for c in cases {
        s.push_str(&format!(
            "[[project]]\n\
             name = \"{name}\"\n\
             repo = \"repos/{name}\"\n\
             build = {{ command = \"make CC=clang\", timeout_secs = 120.0 }}\n\
             analyzer = {{ sources = [\"{file}\"], include_dirs = [\".\"], timeout_secs = 120.0 }}\n\
             test = {{ command = \"make CC=clang test\", timeout_secs = 60.0 }}\n\n",
            name = c.name,
            file = c.file
        ));
    }
    for (p, cutoff) in PROVIDERS.iter().zip(["2024-10-01", "2024-12-01", "2024-06-30"]) {
        s.push_str(&format!(
            "[[provider]]\n\
             provider_id = \"{p}\"\n\
             fixture_dir = \"responses/{p}\"\n\
             model_name = \"{p}-replay\"\n\
             knowledge_cutoff = \"{cutoff}\"\n\n"
        ));
    }
    s
}

/// Writes the corpus into `out_dir` (created if needed) and returns its
/// manifest. Rebuilding into the same directory gives the same commit ids.
pub fn build_fixture_corpus(out_dir: &Path) -> Result<Manifest, FixtureError> {
    std::fs::create_dir_all(out_dir).map_err(|e| FixtureError::OutDirNotWritable {
        path: out_dir.display().to_string(),
        detail: e.to_string(),
    })?;
    let probe = out_dir.join(".probe");
    write(&probe, "")?;
    let _ = std::fs::remove_file(&probe);

    let cases = cases();
    let criteria = SelectionCriteria::default();
    let mut manifest = Manifest {
        config: CONFIG_FILE.into(),
        providers: PROVIDERS.iter().map(|p| p.to_string()).collect(),
        cases: Vec::new(),
    };
    for case in &cases {
        let rel = format!("repos/{}", case.name);
        let repo: PathBuf = out_dir.join(&rel);
        build_repo(case, &repo)?;
        let mined = miner::mine(&repo, case.name, &criteria).map_err(|e| FixtureError::Mining {
            case: case.name.into(),
            detail: e.to_string(),
        })?;
        let [task] = mined.tasks.as_slice() else {
            return Err(FixtureError::Mining {
                case: case.name.into(),
                detail: format!("expected one task, mined {} (skipped: {:?})", mined.tasks.len(), mined.skipped),
            });
        };
        let mut expectations = Vec::new();
        for r in &case.responses {
            write(&out_dir.join("responses").join(r.provider).join(&task.task_id), r.text)?;
            expectations.push(Expectation {
                provider_id: r.provider.into(),
                record_id: record_id(&task.task_id, r.provider),
                response: r.what.into(),
                outcome: (r.outcome)(),
                verdict: r.verdict,
            });
        }
        manifest.cases.push(ManifestCase {
            name: case.name.into(),
            project: case.name.into(),
            task_id: task.task_id.clone(),
            commit_id: task.commit_id.clone(),
            kind: task.kind,
            context_file: task.context_file_path.clone(),
            repo: rel,
            expectations,
        });
    }
    write(&out_dir.join(CONFIG_FILE), &config_text(&cases))?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(&out_dir.join(MANIFEST_FILE), &(json + "\n"))?;
    Ok(manifest)
}
