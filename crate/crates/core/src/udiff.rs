//! Unified diff parsing and application.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("malformed diff at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("hunk {hunk} does not apply at original line {line}")]
    DoesNotApply { hunk: usize, line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffLine {
    Context(String),
    Added(String),
    Removed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    pub lines: Vec<DiffLine>,
    /// `\ No newline at end of file` followed the last old-side line.
    pub old_missing_newline: bool,
    pub new_missing_newline: bool,
}

impl Hunk {
    /// Original-file line numbers of removed lines, and for each added line
    /// the original line number it follows (0 = before the first line).
    pub fn change_positions(&self) -> (Vec<usize>, Vec<usize>) {
        let mut removed = Vec::new();
        let mut inserted_after = Vec::new();
        // Last original line consumed.
        let mut old = self.old_start.saturating_sub(1);
        if self.old_len == 0 {
            // `-N,0` means "insert after line N".
            old = self.old_start;
        }
        for line in &self.lines {
            match line {
                DiffLine::Context(_) => old += 1,
                DiffLine::Removed(_) => {
                    old += 1;
                    removed.push(old);
                }
                DiffLine::Added(_) => inserted_after.push(old),
            }
        }
        (removed, inserted_after)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilePatch {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    pub hunks: Vec<Hunk>,
}

impl FilePatch {
    pub fn path(&self) -> Option<&str> {
        self.new_path.as_deref().or(self.old_path.as_deref())
    }

    pub fn added_lines(&self) -> usize {
        self.count(|l| matches!(l, DiffLine::Added(_)))
    }

    pub fn removed_lines(&self) -> usize {
        self.count(|l| matches!(l, DiffLine::Removed(_)))
    }

    fn count(&self, f: impl Fn(&DiffLine) -> bool) -> usize {
        self.hunks.iter().flat_map(|h| &h.lines).filter(|l| f(l)).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub files: Vec<FilePatch>,
}

impl Patch {
    pub fn is_empty(&self) -> bool {
        self.files.iter().all(|f| f.hunks.is_empty())
    }

    /// Added plus removed lines; context lines do not count.
    pub fn changed_loc(&self) -> usize {
        self.files.iter().map(|f| f.added_lines() + f.removed_lines()).sum()
    }
}

fn strip_path(p: &str) -> Option<String> {
    let p = p.split('\t').next().unwrap_or(p).trim_end();
    if p == "/dev/null" {
        return None;
    }
    let p = p.strip_prefix("a/").or_else(|| p.strip_prefix("b/")).unwrap_or(p);
    Some(p.to_string())
}

fn parse_range(s: &str) -> Option<(usize, usize)> {
    match s.split_once(',') {
        Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn parse_hunk_header(line: &str) -> Option<(usize, usize, usize, usize)> {
    let rest = line.strip_prefix("@@ -")?;
    let (old, rest) = rest.split_once(" +")?;
    let (new, _) = rest.split_once(" @@")?;
    let (os, ol) = parse_range(old)?;
    let (ns, nl) = parse_range(new)?;
    Some((os, ol, ns, nl))
}

/// Parse unified diff text (git or plain `diff -u` output).
pub fn parse(text: &str) -> Result<Patch, DiffError> {
    let mut patch = Patch::default();
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    // A `diff --git` header opened a file that has not seen `---`/`+++` yet.
    let mut git_header_open = false;
    let malformed = |line: usize, reason: &str| DiffError::Malformed {
        line: line + 1,
        reason: reason.to_string(),
    };

    while i < lines.len() {
        let line = lines[i];
        if line.starts_with("diff --git ") {
            let mut parts = line["diff --git ".len()..].split(' ');
            let old = parts.next().and_then(strip_path);
            let new = parts.next().and_then(strip_path);
            patch.files.push(FilePatch {
                old_path: old,
                new_path: new,
                hunks: Vec::new(),
            });
            git_header_open = true;
            i += 1;
        } else if let Some(rest) = line.strip_prefix("--- ") {
            let next = lines.get(i + 1).ok_or_else(|| malformed(i, "missing +++ header"))?;
            let new = next
                .strip_prefix("+++ ")
                .ok_or_else(|| malformed(i + 1, "expected +++ header"))?;
            let old_path = strip_path(rest);
            let new_path = strip_path(new);
            match patch.files.last_mut() {
                Some(f) if git_header_open => {
                    f.old_path = old_path;
                    f.new_path = new_path;
                }
                _ => patch.files.push(FilePatch {
                    old_path,
                    new_path,
                    hunks: Vec::new(),
                }),
            }
            git_header_open = false;
            i += 2;
        } else if line.starts_with("@@ ") {
            let (old_start, old_len, new_start, new_len) =
                parse_hunk_header(line).ok_or_else(|| malformed(i, "bad hunk header"))?;
            git_header_open = false;
            let file = patch.files.last_mut().ok_or_else(|| malformed(i, "hunk before file header"))?;
            let mut hunk = Hunk {
                old_start,
                old_len,
                new_start,
                new_len,
                lines: Vec::new(),
                old_missing_newline: false,
                new_missing_newline: false,
            };
            let (mut old_seen, mut new_seen) = (0, 0);
            i += 1;
            while i < lines.len() && (old_seen < old_len || new_seen < new_len) {
                let l = lines[i];
                match l.as_bytes().first() {
                    Some(b' ') => {
                        hunk.lines.push(DiffLine::Context(l[1..].to_string()));
                        old_seen += 1;
                        new_seen += 1;
                    }
                    // Some tools drop the single space of an empty context line.
                    None => {
                        hunk.lines.push(DiffLine::Context(String::new()));
                        old_seen += 1;
                        new_seen += 1;
                    }
                    Some(b'-') => {
                        hunk.lines.push(DiffLine::Removed(l[1..].to_string()));
                        old_seen += 1;
                    }
                    Some(b'+') => {
                        hunk.lines.push(DiffLine::Added(l[1..].to_string()));
                        new_seen += 1;
                    }
                    Some(b'\\') => {}
                    _ => return Err(malformed(i, "unexpected line inside hunk")),
                }
                i += 1;
                mark_missing_newline(&lines, i, &mut hunk);
                if lines.get(i).is_some_and(|l| l.starts_with('\\')) {
                    i += 1;
                }
            }
            if old_seen != old_len || new_seen != new_len {
                return Err(malformed(i.saturating_sub(1), "hunk shorter than its header"));
            }
            file.hunks.push(hunk);
        } else {
            i += 1;
        }
    }
    Ok(patch)
}

fn mark_missing_newline(lines: &[&str], i: usize, hunk: &mut Hunk) {
    if !lines.get(i).is_some_and(|l| l.starts_with("\\ ")) {
        return;
    }
    match hunk.lines.last() {
        Some(DiffLine::Context(_)) => {
            hunk.old_missing_newline = true;
            hunk.new_missing_newline = true;
        }
        Some(DiffLine::Removed(_)) => hunk.old_missing_newline = true,
        Some(DiffLine::Added(_)) => hunk.new_missing_newline = true,
        None => {}
    }
}

fn content(line: &str) -> &str {
    line.strip_suffix('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .unwrap_or(line)
}

/// Apply one file's hunks to `original`, checking context and removed lines.
pub fn apply(original: &str, file: &FilePatch) -> Result<String, DiffError> {
    let old: Vec<&str> = original.split_inclusive('\n').collect();
    let mut out = String::with_capacity(original.len());
    // Next original line index (0-based) not yet copied.
    let mut cursor = 0usize;

    for (hi, hunk) in file.hunks.iter().enumerate() {
        let start = if hunk.old_len == 0 {
            hunk.old_start
        } else {
            hunk.old_start.saturating_sub(1)
        };
        if start < cursor || start > old.len() {
            return Err(DiffError::DoesNotApply {
                hunk: hi + 1,
                line: hunk.old_start,
            });
        }
        for l in &old[cursor..start] {
            out.push_str(l);
        }
        cursor = start;
        let last_new = hunk
            .lines
            .iter()
            .rposition(|l| !matches!(l, DiffLine::Removed(_)));
        for (li, line) in hunk.lines.iter().enumerate() {
            match line {
                DiffLine::Context(text) | DiffLine::Removed(text) => {
                    let Some(orig) = old.get(cursor) else {
                        return Err(DiffError::DoesNotApply {
                            hunk: hi + 1,
                            line: cursor + 1,
                        });
                    };
                    if content(orig) != text {
                        return Err(DiffError::DoesNotApply {
                            hunk: hi + 1,
                            line: cursor + 1,
                        });
                    }
                    if matches!(line, DiffLine::Context(_)) {
                        if Some(li) == last_new && hunk.new_missing_newline {
                            out.push_str(content(orig));
                        } else {
                            out.push_str(orig);
                        }
                    }
                    cursor += 1;
                }
                DiffLine::Added(text) => {
                    out.push_str(text);
                    if !(Some(li) == last_new && hunk.new_missing_newline) {
                        out.push('\n');
                    }
                }
            }
        }
    }
    for l in &old[cursor..] {
        out.push_str(l);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ORIGINAL: &str = "a\nb\nc\nd\ne\n";

    #[test]
    fn parse_and_apply_git_diff() {
        let diff = "diff --git a/x.c b/x.c\nindex 1..2 100644\n--- a/x.c\n+++ b/x.c\n@@ -2,3 +2,3 @@\n b\n-c\n+C\n d\n";
        let patch = parse(diff).unwrap();
        assert_eq!(patch.files.len(), 1);
        assert_eq!(patch.files[0].path(), Some("x.c"));
        assert_eq!(patch.changed_loc(), 2);
        assert_eq!(apply(ORIGINAL, &patch.files[0]).unwrap(), "a\nb\nC\nd\ne\n");
        let (removed, inserted) = patch.files[0].hunks[0].change_positions();
        assert_eq!(removed, vec![3]);
        assert_eq!(inserted, vec![3]);
    }

    #[test]
    fn pure_insertion_positions() {
        let diff = "--- a/x.c\n+++ b/x.c\n@@ -5,0 +6,2 @@\n+f\n+g\n";
        let patch = parse(diff).unwrap();
        let (removed, inserted) = patch.files[0].hunks[0].change_positions();
        assert!(removed.is_empty());
        assert_eq!(inserted, vec![5, 5]);
        assert_eq!(apply(ORIGINAL, &patch.files[0]).unwrap(), "a\nb\nc\nd\ne\nf\ng\n");
    }

    #[test]
    fn mismatched_context_does_not_apply() {
        let diff = "--- a/x.c\n+++ b/x.c\n@@ -2,2 +2,2 @@\n b\n-z\n+C\n";
        let patch = parse(diff).unwrap();
        assert_eq!(
            apply(ORIGINAL, &patch.files[0]),
            Err(DiffError::DoesNotApply { hunk: 1, line: 3 })
        );
    }

    #[test]
    fn missing_newline_marker() {
        let diff = "--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n\\ No newline at end of file\n+b\n\\ No newline at end of file\n";
        let patch = parse(diff).unwrap();
        assert_eq!(apply("a", &patch.files[0]).unwrap(), "b");
    }

    #[test]
    fn empty_text_is_empty_patch() {
        assert!(parse("").unwrap().is_empty());
    }

    #[test]
    fn truncated_hunk_is_malformed() {
        assert!(matches!(
            parse("--- a/x\n+++ b/x\n@@ -1,3 +1,3 @@\n a\n"),
            Err(DiffError::Malformed { .. })
        ));
    }
}
