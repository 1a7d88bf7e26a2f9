//! Hand-built tasks for projects whose history cannot be mined.
//!
//! One JSON object per line. Required: `project`, `commit_id`, `kind`
//! (`bug_fix` or `feature_enhancement`), `message`, `context_file_path`,
//! `context_file_pre`, `function_name`, `human_function_post`,
//! `author_date` (YYYY-MM-DD). Optional: `task_id`, `base_revision`,
//! `human_diff`. Sizes, span and message quality are derived.

use std::path::Path;

use chrono::NaiveDate;
use serde_json::Value;
use thiserror::Error;

use crate::miner::{assess_message, physical_lines, CommitKind, CommitTask, SelectionCriteria};
use crate::splicer;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImportError {
    #[error("line {line}: field `{field}`: {detail}")]
    SchemaViolation { line: usize, field: String, detail: String },
    #[error("cannot read {path}: {detail}")]
    Unreadable { path: String, detail: String },
}

const REQUIRED: &[&str] = &[
    "project",
    "commit_id",
    "kind",
    "message",
    "context_file_path",
    "context_file_pre",
    "function_name",
    "human_function_post",
    "author_date",
];
const OPTIONAL: &[&str] = &["task_id", "base_revision", "human_diff"];

fn violation(line: usize, field: &str, detail: impl Into<String>) -> ImportError {
    ImportError::SchemaViolation {
        line,
        field: field.to_string(),
        detail: detail.into(),
    }
}

/// Unified diff between two versions of one file, `a/` and `b/` prefixed.
pub fn file_diff(path: &str, before: &str, after: &str) -> String {
    similar::TextDiff::from_lines(before, after)
        .unified_diff()
        .context_radius(3)
        .header(&format!("a/{path}"), &format!("b/{path}"))
        .to_string()
}

/// The pre-commit file with the human function put in place, the same way
/// a candidate is.
pub fn human_file(task: &CommitTask) -> Result<String, splicer::SpliceError> {
    let spliced = match &task.function_span_pre {
        Some(span) => splicer::splice(&task.context_file_pre, span, &task.human_function_post)?,
        None => splicer::insert_function(&task.context_file_pre, &task.human_function_post)?,
    };
    Ok(spliced.text)
}

pub fn parse_task_line(text: &str, line: usize, criteria: &SelectionCriteria) -> Result<CommitTask, ImportError> {
    let v: Value = serde_json::from_str(text).map_err(|e| violation(line, "(line)", e.to_string()))?;
    let obj = v.as_object().ok_or_else(|| violation(line, "(line)", "expected a JSON object"))?;
    for key in obj.keys() {
        if !REQUIRED.contains(&key.as_str()) && !OPTIONAL.contains(&key.as_str()) {
            return Err(violation(line, key, "unknown field"));
        }
    }
    let get = |field: &str| -> Result<String, ImportError> {
        match obj.get(field) {
            None | Some(Value::Null) => Err(violation(line, field, "missing")),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(violation(line, field, "expected a string")),
        }
    };
    let opt = |field: &str| -> Result<Option<String>, ImportError> {
        match obj.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(violation(line, field, "expected a string")),
        }
    };
    // Every required field is checked before any is interpreted, so the
    // first missing one is reported.
    let mut values = std::collections::BTreeMap::new();
    for f in REQUIRED {
        values.insert(*f, get(f)?);
    }
    let project = values["project"].clone();
    let commit_id = values["commit_id"].clone();
    let kind = match values["kind"].as_str() {
        "bug_fix" => CommitKind::BugFix,
        "feature_enhancement" => CommitKind::FeatureEnhancement,
        other => return Err(violation(line, "kind", format!("`{other}` is not bug_fix or feature_enhancement"))),
    };
    let function_name = values["function_name"].clone();
    if function_name.trim().is_empty() {
        return Err(violation(line, "function_name", "empty"));
    }
    let author_date = NaiveDate::parse_from_str(&values["author_date"], "%Y-%m-%d")
        .map_err(|e| violation(line, "author_date", e.to_string()))?;
    let pre = values["context_file_pre"].clone();
    let human = values["human_function_post"].clone();
    splicer::locate_function(&human, &function_name)
        .map_err(|e| violation(line, "human_function_post", e.to_string()))?;
    let function_span_pre = match kind {
        CommitKind::BugFix => Some(
            splicer::locate_function(&pre, &function_name)
                .map_err(|e| violation(line, "context_file_pre", e.to_string()))?,
        ),
        CommitKind::FeatureEnhancement => match splicer::locate_function(&pre, &function_name) {
            Err(splicer::SpliceError::NotFound(_)) => None,
            Ok(_) => {
                return Err(violation(
                    line,
                    "context_file_pre",
                    "a feature task's function must not exist before the commit",
                ))
            }
            Err(e) => return Err(violation(line, "context_file_pre", e.to_string())),
        },
    };
    let function_loc = match &function_span_pre {
        Some(s) => s.line_count(),
        None => physical_lines(&human),
    };
    let short = &commit_id[..commit_id.len().min(12)];
    let mut task = CommitTask {
        task_id: opt("task_id")?.unwrap_or_else(|| format!("{project}-{short}")),
        project,
        commit_id,
        base_revision: opt("base_revision")?,
        kind,
        message_quality: assess_message(&values["message"], criteria.min_message_tokens),
        message: values["message"].trim().to_string(),
        context_file_path: values["context_file_path"].clone(),
        file_loc: physical_lines(&pre),
        context_file_pre: pre,
        function_name,
        function_span_pre,
        human_function_post: human,
        human_diff: String::new(),
        function_loc,
        patch_loc: 0,
        author_date,
    };
    let after = human_file(&task).map_err(|e| violation(line, "human_function_post", e.to_string()))?;
    let diff = match opt("human_diff")? {
        Some(d) => d,
        None => file_diff(&task.context_file_path, &task.context_file_pre, &after),
    };
    task.patch_loc = crate::udiff::parse(&diff)
        .map_err(|e| violation(line, "human_diff", e.to_string()))?
        .changed_loc();
    task.human_diff = diff;
    Ok(task)
}

pub fn import_tasks(path: &Path, criteria: &SelectionCriteria) -> Result<Vec<CommitTask>, ImportError> {
    let text = std::fs::read_to_string(path).map_err(|e| ImportError::Unreadable {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_task_line(line, i + 1, criteria)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn line() -> Value {
        json!({
            "project": "bison",
            "commit_id": "abcdef0123456789",
            "kind": "bug_fix",
            "message": "Fix a crash when the grammar file is empty",
            "context_file_path": "src/reader.c",
            "context_file_pre": "static int f(void)\n{\n    return 0;\n}\n\nint read_grammar(void)\n{\n    return f();\n}\n",
            "function_name": "read_grammar",
            "human_function_post": "int read_grammar(void)\n{\n    return f() + 1;\n}",
            "author_date": "2024-02-03"
        })
    }

    #[test]
    fn valid_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tasks.jsonl");
        std::fs::write(&p, format!("{}\n", line())).unwrap();
        let tasks = import_tasks(&p, &SelectionCriteria::default()).unwrap();
        assert_eq!(tasks.len(), 1);
        let t = &tasks[0];
        assert_eq!(t.task_id, "bison-abcdef012345");
        assert_eq!(t.function_span_pre.as_ref().unwrap().start_line, 6);
        assert_eq!(t.patch_loc, 2);
        assert_eq!((t.file_loc, t.function_loc), (9, 4));
        assert!(t.human_diff.starts_with("--- a/src/reader.c\n+++ b/src/reader.c\n"));
    }

    #[test]
    fn missing_field_is_named() {
        let mut v = line();
        v.as_object_mut().unwrap().remove("function_name");
        let err = parse_task_line(&v.to_string(), 3, &SelectionCriteria::default()).unwrap_err();
        assert_eq!(
            err,
            ImportError::SchemaViolation {
                line: 3,
                field: "function_name".into(),
                detail: "missing".into()
            }
        );
    }

    #[test]
    fn other_violations() {
        let crit = SelectionCriteria::default();
        let mut v = line();
        v["kind"] = json!("refactor");
        assert!(matches!(parse_task_line(&v.to_string(), 1, &crit), Err(ImportError::SchemaViolation { field, .. }) if field == "kind"));
        let mut v = line();
        v["extra"] = json!(1);
        assert!(matches!(parse_task_line(&v.to_string(), 1, &crit), Err(ImportError::SchemaViolation { field, .. }) if field == "extra"));
        let mut v = line();
        v["function_name"] = json!("nope");
        assert!(matches!(parse_task_line(&v.to_string(), 1, &crit), Err(ImportError::SchemaViolation { field, .. }) if field == "human_function_post"));
        let mut v = line();
        v["author_date"] = json!(20240203);
        assert!(matches!(parse_task_line(&v.to_string(), 1, &crit), Err(ImportError::SchemaViolation { field, .. }) if field == "author_date"));
    }
}
