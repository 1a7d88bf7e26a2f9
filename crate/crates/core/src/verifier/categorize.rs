use serde::{Deserialize, Serialize};

use super::{Diagnostic, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IssueCategory {
    NullDereference,
    UndeclaredIdentifier,
    UnsafeCast,
    DoubleFree,
    UseAfterFree,
    SyntaxSemantic,
    UninitializedVariable,
    EmptyPartial,
}

impl IssueCategory {
    pub const ALL: [IssueCategory; 8] = [
        IssueCategory::NullDereference,
        IssueCategory::UndeclaredIdentifier,
        IssueCategory::UnsafeCast,
        IssueCategory::DoubleFree,
        IssueCategory::UseAfterFree,
        IssueCategory::SyntaxSemantic,
        IssueCategory::UninitializedVariable,
        IssueCategory::EmptyPartial,
    ];

    pub fn label(self) -> &'static str {
        match self {
            IssueCategory::NullDereference => "Null Dereference",
            IssueCategory::UndeclaredIdentifier => "Undeclared Identifier",
            IssueCategory::UnsafeCast => "Unsafe Cast",
            IssueCategory::DoubleFree => "Double Free",
            IssueCategory::UseAfterFree => "Use After Free",
            IssueCategory::SyntaxSemantic => "Syntax/Semantic",
            IssueCategory::UninitializedVariable => "Uninitialized Variable",
            IssueCategory::EmptyPartial => "Empty/Partial",
        }
    }
}

/// Prefix of checker ids given to front-end (compiler) diagnostics. The
/// remainder is the warning flag name, or `error` / `warning` when the
/// diagnostic has no flag.
pub const FRONTEND_PREFIX: &str = "clang-diagnostic-";

#[derive(Debug, Clone, Copy)]
enum CheckerMatch {
    Exact(&'static str),
    Prefix(&'static str),
}

impl CheckerMatch {
    fn matches(self, id: &str) -> bool {
        match self {
            CheckerMatch::Exact(e) => id == e,
            CheckerMatch::Prefix(p) => id.starts_with(p),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Rule {
    checker: CheckerMatch,
    /// Case-insensitive substring of the message; `None` matches any.
    message: Option<&'static str>,
    /// `None` deliberately leaves the diagnostic uncategorized.
    category: Option<IssueCategory>,
}

const fn rule(checker: CheckerMatch, message: Option<&'static str>, category: Option<IssueCategory>) -> Rule {
    Rule {
        checker,
        message,
        category,
    }
}

use CheckerMatch::{Exact, Prefix};
use IssueCategory::*;

/// Ordered; the first matching rule decides.
const RULES: &[Rule] = &[
    // Null pointers.
    rule(Exact("core.NullDereference"), None, Some(NullDereference)),
    rule(Exact("core.NonNullParamChecker"), None, Some(NullDereference)),
    rule(Exact("nullability.NullPassedToNonnull"), None, Some(NullDereference)),
    rule(Exact("nullability.NullReturnedFromNonnull"), None, Some(NullDereference)),
    rule(Exact("unix.cstring.NullArg"), None, Some(NullDereference)),
    // Heap lifetime.
    rule(Exact("unix.Malloc"), Some("attempt to free released memory"), Some(DoubleFree)),
    rule(Exact("unix.Malloc"), Some("released twice"), Some(DoubleFree)),
    rule(Exact("unix.Malloc"), Some("after it is freed"), Some(UseAfterFree)),
    rule(Exact("unix.Malloc"), Some("after it is released"), Some(UseAfterFree)),
    rule(Exact("unix.Malloc"), Some("released memory"), Some(UseAfterFree)),
    rule(Exact("unix.Malloc"), None, None),
    rule(Exact("unix.MismatchedDeallocator"), None, None),
    // Casts and size-mismatched conversions.
    rule(Exact("unix.MallocSizeof"), None, Some(UnsafeCast)),
    rule(Exact("alpha.core.CastSize"), None, Some(UnsafeCast)),
    rule(Exact("alpha.core.CastToStruct"), None, Some(UnsafeCast)),
    // Uninitialized values.
    rule(Prefix("core.uninitialized."), None, Some(UninitializedVariable)),
    rule(Exact("core.UndefinedBinaryOperatorResult"), Some("garbage value"), Some(UninitializedVariable)),
    rule(Exact("core.UndefinedBinaryOperatorResult"), Some("uninitialized"), Some(UninitializedVariable)),
    rule(Exact("core.UndefinedBinaryOperatorResult"), None, None),
    rule(Exact("core.CallAndMessage"), Some("uninitialized"), Some(UninitializedVariable)),
    rule(Exact("core.CallAndMessage"), Some("garbage value"), Some(UninitializedVariable)),
    rule(Exact("core.CallAndMessage"), Some("undefined"), Some(UninitializedVariable)),
    rule(Exact("core.CallAndMessage"), Some("null"), Some(NullDereference)),
    rule(Exact("core.CallAndMessage"), None, None),
    // Analyzer findings outside the taxonomy.
    rule(Exact("alpha.unix.cstring.OutOfBounds"), None, None),
    rule(Exact("core.DivideZero"), None, None),
    rule(Exact("core.StackAddressEscape"), None, None),
    rule(Exact("core.VLASize"), None, None),
    rule(Exact("deadcode.DeadStores"), None, None),
    rule(Prefix("security.insecureAPI."), None, None),
    rule(Exact("unix.API"), None, None),
    rule(Exact("unix.Vfork"), None, None),
    rule(Exact("unix.cstring.BadSizeArg"), None, None),
    // Front-end diagnostics with a warning flag.
    rule(Exact("clang-diagnostic-implicit-function-declaration"), None, Some(UndeclaredIdentifier)),
    rule(Exact("clang-diagnostic-int-conversion"), None, Some(UnsafeCast)),
    rule(Exact("clang-diagnostic-incompatible-pointer-types"), None, Some(UnsafeCast)),
    rule(Exact("clang-diagnostic-incompatible-pointer-types-discards-qualifiers"), None, Some(UnsafeCast)),
    rule(Exact("clang-diagnostic-int-to-pointer-cast"), None, Some(UnsafeCast)),
    rule(Exact("clang-diagnostic-pointer-to-int-cast"), None, Some(UnsafeCast)),
    rule(Exact("clang-diagnostic-pointer-sign"), None, Some(UnsafeCast)),
    rule(Exact("clang-diagnostic-uninitialized"), None, Some(UninitializedVariable)),
    rule(Exact("clang-diagnostic-sometimes-uninitialized"), None, Some(UninitializedVariable)),
    // Front-end errors, by message.
    rule(Prefix(FRONTEND_PREFIX), Some("undeclared identifier"), Some(UndeclaredIdentifier)),
    rule(Prefix(FRONTEND_PREFIX), Some("undeclared function"), Some(UndeclaredIdentifier)),
    rule(Prefix(FRONTEND_PREFIX), Some("implicit declaration of function"), Some(UndeclaredIdentifier)),
    rule(Prefix(FRONTEND_PREFIX), Some("no member named"), Some(UndeclaredIdentifier)),
    rule(Prefix(FRONTEND_PREFIX), Some("unknown type name"), Some(UndeclaredIdentifier)),
    rule(Prefix(FRONTEND_PREFIX), Some("incompatible type"), Some(UnsafeCast)),
    rule(Prefix(FRONTEND_PREFIX), Some("incompatible pointer"), Some(UnsafeCast)),
    rule(Prefix(FRONTEND_PREFIX), Some("incompatible integer to pointer"), Some(UnsafeCast)),
    rule(Prefix(FRONTEND_PREFIX), Some("incompatible pointer to integer"), Some(UnsafeCast)),
    rule(Prefix(FRONTEND_PREFIX), Some("invalid operands"), Some(UnsafeCast)),
];

fn rule_matches(r: &Rule, d: &Diagnostic) -> bool {
    r.checker.matches(&d.checker_id)
        && r.message
            .map_or(true, |m| d.message.to_ascii_lowercase().contains(m))
}

/// Issue category of one diagnostic, or `None` for findings outside the
/// taxonomy. Remaining front-end errors fall through to `SyntaxSemantic`.
pub fn categorize(d: &Diagnostic) -> Option<IssueCategory> {
    if let Some(r) = RULES.iter().find(|r| rule_matches(r, d)) {
        return r.category;
    }
    if d.checker_id.starts_with(FRONTEND_PREFIX) && d.severity == Severity::Error {
        return Some(SyntaxSemantic);
    }
    None
}

/// Whether the table names `checker_id` explicitly (not through the
/// front-end fallback).
pub fn has_explicit_rule(checker_id: &str) -> bool {
    RULES
        .iter()
        .filter(|r| !matches!(r.checker, Prefix(p) if p == FRONTEND_PREFIX))
        .any(|r| r.checker.matches(checker_id))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(checker: &str, message: &str, severity: Severity) -> Diagnostic {
        Diagnostic {
            tool: "clang".into(),
            checker_id: checker.into(),
            message: message.into(),
            file: "x.c".into(),
            line: 1,
            severity,
        }
    }

    #[test]
    fn table_examples() {
        assert_eq!(
            categorize(&diag(
                "clang-diagnostic-error",
                "use of undeclared identifier 'hashtable_size'",
                Severity::Error
            )),
            Some(UndeclaredIdentifier)
        );
        assert_eq!(
            categorize(&diag("core.NullDereference", "Dereference of null pointer", Severity::Warning)),
            Some(NullDereference)
        );
        assert_eq!(
            categorize(&diag("clang-diagnostic-error", "expected '}'", Severity::Error)),
            Some(SyntaxSemantic)
        );
    }

    #[test]
    fn malloc_checker_splits_by_message() {
        assert_eq!(
            categorize(&diag("unix.Malloc", "Attempt to free released memory", Severity::Warning)),
            Some(DoubleFree)
        );
        assert_eq!(
            categorize(&diag("unix.Malloc", "Use of memory after it is freed", Severity::Warning)),
            Some(UseAfterFree)
        );
        assert_eq!(
            categorize(&diag("unix.Malloc", "Potential leak of memory pointed to by 'p'", Severity::Warning)),
            None
        );
    }

    #[test]
    fn conversions_are_unsafe_casts() {
        assert_eq!(
            categorize(&diag(
                "clang-diagnostic-int-conversion",
                "incompatible integer to pointer conversion assigning to 'char *' from 'char'",
                Severity::Warning
            )),
            Some(UnsafeCast)
        );
        assert_eq!(
            categorize(&diag(
                "clang-diagnostic-error",
                "assigning to 'json_t *' from incompatible type 'int'",
                Severity::Error
            )),
            Some(UnsafeCast)
        );
    }

    #[test]
    fn garbage_value_is_uninitialized() {
        assert_eq!(
            categorize(&diag(
                "core.UndefinedBinaryOperatorResult",
                "The left operand of '+' is a garbage value",
                Severity::Warning
            )),
            Some(UninitializedVariable)
        );
    }

    #[test]
    fn front_end_warnings_without_rule_stay_uncategorized() {
        assert_eq!(
            categorize(&diag("clang-diagnostic-unused-variable", "unused variable 'x'", Severity::Warning)),
            None
        );
        assert_eq!(categorize(&diag("some.unknown.Checker", "boom", Severity::Warning)), None);
    }

    #[test]
    fn empty_partial_never_comes_from_diagnostics() {
        for r in RULES {
            assert_ne!(r.category, Some(EmptyPartial));
        }
    }
}
