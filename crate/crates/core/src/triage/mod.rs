//! Two-reviewer manual classification of evaluated patches.

mod server;
mod store;

use serde::{Deserialize, Serialize};

pub use server::{router, serve, AppState, ServeError, ServeHandle};
pub use store::{read_log, ReviewStatus, SealInfo, StoreOptions, StoredVerdict, TriageError, TriageEvent, TriageState, TriageStore, VERDICT_LOG};

use crate::provider::PatchScope;
use crate::record::EvaluationRecord;
use crate::splicer::{self, normalize_whitespace, SpliceMode};
use crate::verifier::{CompileOutcome, IssueCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VerdictCategory {
    IdenticalToHuman,
    DifferentAppearsCorrect,
    PartialFix,
    EmptyPatch,
    WrongSolution,
    DeletedUnrelatedCode,
    UncompilableUndeclared,
}

impl VerdictCategory {
    pub const ALL: [VerdictCategory; 7] = [
        VerdictCategory::IdenticalToHuman,
        VerdictCategory::DifferentAppearsCorrect,
        VerdictCategory::PartialFix,
        VerdictCategory::EmptyPatch,
        VerdictCategory::WrongSolution,
        VerdictCategory::DeletedUnrelatedCode,
        VerdictCategory::UncompilableUndeclared,
    ];

    pub fn is_correct(self) -> bool {
        matches!(self, VerdictCategory::IdenticalToHuman | VerdictCategory::DifferentAppearsCorrect)
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).expect("listed")
    }

    pub fn label(self) -> &'static str {
        match self {
            VerdictCategory::IdenticalToHuman => "Identical to Human",
            VerdictCategory::DifferentAppearsCorrect => "Different, Appears Correct",
            VerdictCategory::PartialFix => "Partial Fix",
            VerdictCategory::EmptyPatch => "Empty Patch",
            VerdictCategory::WrongSolution => "Wrong Solution",
            VerdictCategory::DeletedUnrelatedCode => "Deleted Unrelated Code",
            VerdictCategory::UncompilableUndeclared => "Uncompilable (Undeclared Identifiers)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageVerdict {
    pub task_id: String,
    pub provider_id: String,
    pub reviewer_id: String,
    pub category: VerdictCategory,
    #[serde(default)]
    pub notes: String,
    pub timestamp: chrono::DateTime<chrono::Utc>,
}

impl TriageVerdict {
    pub fn record_id(&self) -> String {
        crate::record::record_id(&self.task_id, &self.provider_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub n_double_reviewed: usize,
    pub n_agree: usize,
    /// Absent when nothing was reviewed twice.
    pub raw_agreement: Option<f64>,
    /// Category names in matrix order.
    pub categories: Vec<VerdictCategory>,
    /// Rows: first reviewer (by reviewer id order), columns: second.
    pub per_category_confusion: Vec<Vec<usize>>,
}

/// Agreement over pairs of categories, one pair per double-reviewed record.
pub fn agreement_from_pairs(pairs: &[(VerdictCategory, VerdictCategory)]) -> AgreementStats {
    let mut confusion = vec![vec![0usize; 7]; 7];
    let mut n_agree = 0;
    for (a, b) in pairs {
        confusion[a.index()][b.index()] += 1;
        if a == b {
            n_agree += 1;
        }
    }
    let n = pairs.len();
    AgreementStats {
        n_double_reviewed: n,
        n_agree,
        raw_agreement: (n > 0).then(|| n_agree as f64 / n as f64),
        categories: VerdictCategory::ALL.to_vec(),
        per_category_confusion: confusion,
    }
}

/// The candidate's version of the target function, when one can be found.
pub fn candidate_function(record: &EvaluationRecord) -> Option<String> {
    let patch = record.patch.as_ref()?;
    match patch.scope {
        PatchScope::FunctionOnly => Some(patch.function_text.clone()),
        PatchScope::WholeFile => {
            let span = splicer::locate_function(&patch.function_text, &record.task.function_name).ok()?;
            splicer::extract(&patch.function_text, &span).ok()
        }
    }
}

/// Machine pre-fill for the review form. Only categories that follow
/// mechanically from the record are ever suggested.
pub fn suggest_category(record: &EvaluationRecord) -> Option<VerdictCategory> {
    let patch = record.patch.as_ref()?;
    if patch.is_empty {
        return Some(VerdictCategory::EmptyPatch);
    }
    if let Some(v) = record.verification.done() {
        if matches!(v.compile_outcome, CompileOutcome::CompileError { .. })
            && v.issues.iter().any(|i| i.category == IssueCategory::UndeclaredIdentifier)
        {
            return Some(VerdictCategory::UncompilableUndeclared);
        }
    }
    if let Some(s) = &record.splice {
        if s.mode == SpliceMode::WholeFileAdopt
            && s.structural_diff.as_ref().is_some_and(|d| d.deletes_outside_target())
        {
            return Some(VerdictCategory::DeletedUnrelatedCode);
        }
    }
    if !patch.is_partial {
        if let Some(f) = candidate_function(record) {
            if normalize_whitespace(&f) == normalize_whitespace(&record.task.human_function_post) {
                return Some(VerdictCategory::IdenticalToHuman);
            }
        }
    }
    None
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    #[test]
    fn correctness_partition() {
        let correct: Vec<_> = VerdictCategory::ALL.iter().filter(|c| c.is_correct()).collect();
        assert_eq!(
            correct,
            vec![&VerdictCategory::IdenticalToHuman, &VerdictCategory::DifferentAppearsCorrect]
        );
    }

    #[test]
    fn agreement_ratios() {
        use VerdictCategory::*;
        let same: Vec<_> = (0..10).map(|_| (WrongSolution, WrongSolution)).collect();
        assert_eq!(agreement_from_pairs(&same).raw_agreement, Some(1.0));

        let mut mixed: Vec<_> = (0..7).map(|_| (EmptyPatch, EmptyPatch)).collect();
        mixed.extend((0..3).map(|_| (PartialFix, WrongSolution)));
        let s = agreement_from_pairs(&mixed);
        assert_eq!(s.n_double_reviewed, 10);
        assert_eq!(s.n_agree, 7);
        assert!((s.raw_agreement.unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(s.per_category_confusion[PartialFix.index()][WrongSolution.index()], 3);

        let none = agreement_from_pairs(&[]);
        assert_eq!(none.n_double_reviewed, 0);
        assert_eq!(none.raw_agreement, None);
        assert_eq!(serde_json::to_value(&none).unwrap()["raw_agreement"], serde_json::Value::Null);
    }

    fn with_patch(text: &str, is_empty: bool) -> EvaluationRecord {
        let mut r = crate::record::tests::sample_record("t", "p");
        r.patch = Some(crate::provider::GeneratedPatch {
            function_text: text.into(),
            scope: PatchScope::FunctionOnly,
            is_empty,
            is_partial: false,
            stripped_citations: Vec::new(),
            target_found: true,
        });
        r
    }

    #[test]
    fn suggestions() {
        assert_eq!(suggest_category(&crate::record::tests::sample_record("t", "p")), None);
        let r = with_patch("int json_object_clear(json_t *j)\n{\n    return 0;\n}\n", true);
        assert_eq!(suggest_category(&r), Some(VerdictCategory::EmptyPatch));

        // Whitespace differences do not matter; the human text is the oracle.
        let r = with_patch("int human_only_marker(void) {\n  return 42;\n}", false);
        assert_eq!(suggest_category(&r), Some(VerdictCategory::IdenticalToHuman));

        // A changed comment is a difference.
        let r = with_patch("int human_only_marker(void) {\n  return 42; /* answer */\n}", false);
        assert_eq!(suggest_category(&r), None);

        let mut r = with_patch("int json_object_clear(json_t *j)\n{\n    return nope(j);\n}\n", false);
        r.verification = crate::record::Stage::Done(crate::verifier::VerificationReport {
            compile_outcome: CompileOutcome::CompileError {
                messages: vec!["use of undeclared identifier 'nope'".into()],
            },
            issues: vec![crate::verifier::CategorizedIssue {
                diagnostic: crate::verifier::Diagnostic {
                    tool: "clang".into(),
                    checker_id: "clang-diagnostic-error".into(),
                    message: "use of undeclared identifier 'nope'".into(),
                    file: "src/value.c".into(),
                    line: 3,
                    severity: crate::verifier::Severity::Error,
                },
                category: IssueCategory::UndeclaredIdentifier,
            }],
            uncategorized: Vec::new(),
            baseline_issues: Vec::new(),
            baseline_uncategorized: Vec::new(),
            issue_delta: Default::default(),
            uncategorized_delta: 0,
            analyzer_failures: Vec::new(),
            build_log: String::new(),
        });
        assert_eq!(suggest_category(&r), Some(VerdictCategory::UncompilableUndeclared));
    }
}
