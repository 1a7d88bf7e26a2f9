use serde::{Deserialize, Serialize};
use similar::{ChangeTag, TextDiff};

use super::scan;

/// Line changes attributed to one top-level construct of the original file.
/// `function` is `None` for lines outside any function definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructChange {
    pub function: Option<String>,
    pub lines_added: usize,
    pub lines_deleted: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseLabel {
    pub function: Option<String>,
    pub label: String,
}

/// What a whole-file candidate changed relative to the original file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralDiff {
    pub target_function: String,
    pub changes: Vec<ConstructChange>,
    /// Functions of the original file with no definition in the candidate.
    pub removed_functions: Vec<String>,
    pub deleted_case_labels: Vec<CaseLabel>,
}

impl StructuralDiff {
    pub fn is_empty(&self) -> bool {
        self.changes.is_empty() && self.removed_functions.is_empty()
    }

    /// Every change falls inside the target function.
    pub fn confined_to_target(&self) -> bool {
        self.removed_functions.is_empty()
            && self
                .changes
                .iter()
                .all(|c| c.function.as_deref() == Some(self.target_function.as_str()))
    }

    /// The candidate deleted code belonging to something other than the target.
    pub fn deletes_outside_target(&self) -> bool {
        self.removed_functions.iter().any(|f| *f != self.target_function)
            || self.changes.iter().any(|c| {
                c.lines_deleted > 0 && c.function.as_deref() != Some(self.target_function.as_str())
            })
    }
}

fn is_case_label(line: &str) -> bool {
    let t = line.trim_start();
    (t.starts_with("case ") || t.starts_with("case\t") || t.starts_with("default:") || t.starts_with("default :"))
        && t.contains(':')
}

/// Line-level diff of `candidate` against `original`, with each deleted or
/// inserted line attributed to the original top-level function around it.
pub fn structural_diff(original: &str, candidate: &str, target_function: &str) -> StructuralDiff {
    let spans = scan(original).functions;
    let owner = |old_line: usize| -> Option<String> {
        spans
            .iter()
            .find(|s| s.start_line <= old_line && old_line <= s.end_line)
            .map(|s| s.name.clone())
    };
    // Insertions sit between old lines; attribute them to a function only
    // when strictly inside its span.
    let insert_owner = |after_old_line: usize| -> Option<String> {
        spans
            .iter()
            .find(|s| s.start_line <= after_old_line && after_old_line < s.end_line)
            .map(|s| s.name.clone())
    };

    let mut changes: Vec<ConstructChange> = Vec::new();
    let mut bump = |function: Option<String>, added: usize, deleted: usize| {
        match changes.iter_mut().find(|c| c.function == function) {
            Some(c) => {
                c.lines_added += added;
                c.lines_deleted += deleted;
            }
            None => changes.push(ConstructChange {
                function,
                lines_added: added,
                lines_deleted: deleted,
            }),
        }
    };
    let mut deleted_case_labels = Vec::new();

    let diff = TextDiff::from_lines(original, candidate);
    // Number of original lines consumed so far.
    let mut old_line = 0usize;
    for change in diff.iter_all_changes() {
        match change.tag() {
            ChangeTag::Equal => old_line += 1,
            ChangeTag::Delete => {
                old_line += 1;
                let function = owner(old_line);
                if is_case_label(change.value()) {
                    deleted_case_labels.push(CaseLabel {
                        function: function.clone(),
                        label: change.value().trim().to_string(),
                    });
                }
                bump(function, 0, 1);
            }
            ChangeTag::Insert => bump(insert_owner(old_line), 1, 0),
        }
    }

    let candidate_names: Vec<String> = scan(candidate).functions.into_iter().map(|f| f.name).collect();
    let mut removed_functions: Vec<String> = spans
        .iter()
        .map(|s| s.name.clone())
        .filter(|n| !candidate_names.contains(n))
        .collect();
    removed_functions.dedup();

    StructuralDiff {
        target_function: target_function.to_string(),
        changes,
        removed_functions,
        deleted_case_labels,
    }
}
