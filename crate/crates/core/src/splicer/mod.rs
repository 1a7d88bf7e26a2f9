//! Top-level C function location and text splicing.
//!
//! A candidate tree differs from the pre-commit tree only in the bytes that
//! [`splice`], [`insert_function`] or [`adopt_whole_file`] produce; every
//! other byte of the file is copied through untouched.

mod lexer;
mod structural;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use lexer::{lex, Directive, Token, TokenKind};

pub(crate) use lexer::braces_balanced;
pub use structural::{structural_diff, CaseLabel, ConstructChange, StructuralDiff};

/// Whether `src` holds anything besides whitespace and comments.
pub(crate) fn has_code(src: &str) -> bool {
    let lexed = lex(src);
    !lexed.tokens.is_empty() || !lexed.directives.is_empty()
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum SpliceError {
    #[error("function `{0}` not found")]
    NotFound(String),
    #[error("function `{name}` is defined {count} times at top level")]
    Ambiguous { name: String, count: usize },
    #[error("unbalanced braces (opened at line {line}){}", directive_note(.directive))]
    Unbalanced {
        line: usize,
        /// First conditional-compilation directive crossed by the open region.
        directive: Option<(usize, String)>,
    },
    #[error("span no longer matches the source text")]
    SpanStale,
    #[error("function `{0}` is already defined")]
    AlreadyDefined(String),
}

fn directive_note(d: &Option<(usize, String)>) -> String {
    match d {
        Some((line, text)) => format!("; counting crosses `{}` at line {line}", text.trim()),
        None => String::new(),
    }
}

/// A top-level function definition: 1-based inclusive line interval from
/// the first declarator line to the closing-brace line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpan {
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
    pub signature_text: String,
    /// Digest of the spanned lines; detects a stale span at splice time.
    pub fingerprint: String,
}

impl FunctionSpan {
    pub fn line_count(&self) -> usize {
        self.end_line + 1 - self.start_line
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpliceMode {
    Replace,
    Insert,
    WholeFileAdopt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SpliceSite {
    Span(FunctionSpan),
    /// 1-based line at which the inserted text begins.
    InsertAt { line: usize },
    WholeFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplicedSource {
    pub text: String,
    pub site: SpliceSite,
    pub mode: SpliceMode,
    /// Only present for [`SpliceMode::WholeFileAdopt`].
    pub structural_diff: Option<StructuralDiff>,
}

const NON_NAME_WORDS: &[&str] = &[
    "if", "while", "for", "switch", "return", "sizeof", "typeof", "__typeof__", "_Alignof",
    "alignof", "__attribute__", "__attribute", "__declspec", "__asm__", "asm", "__asm",
    "_Static_assert", "static_assert", "int", "char", "void", "short", "long", "unsigned",
    "signed", "float", "double", "_Bool", "const", "volatile", "static", "extern", "inline",
    "struct", "union", "enum", "typedef", "register", "auto", "restrict", "__restrict",
    "__inline", "__inline__", "__extension__", "_Noreturn", "do", "else", "case", "goto",
];

fn is_name_candidate(tok: &Token<'_>) -> bool {
    tok.kind == TokenKind::Ident && !NON_NAME_WORDS.contains(&tok.text)
}

pub(crate) struct Scan {
    pub functions: Vec<FunctionSpan>,
    pub error: Option<SpliceError>,
}

/// Every top-level function definition in `source`, in file order.
pub fn list_functions(source: &str) -> Result<Vec<FunctionSpan>, SpliceError> {
    let scan = scan(source);
    match scan.error {
        Some(e) => Err(e),
        None => Ok(scan.functions),
    }
}

/// Like [`list_functions`] but keeps whatever was found before a brace
/// imbalance. Used on model output, which may be truncated.
pub(crate) fn scan(source: &str) -> Scan {
    let lexed = lex(source);
    let toks = &lexed.tokens;
    let lines = line_bounds(source);
    let mut functions = Vec::new();
    // Indices of tokens belonging to the current top-level construct.
    let mut chunk: Vec<usize> = Vec::new();
    let mut paren_depth = 0usize;
    let mut i = 0;

    while i < toks.len() {
        let tok = toks[i];
        match tok.kind {
            TokenKind::Punct(b'{') => {
                let Some(close) = matching_brace(toks, i) else {
                    return Scan {
                        functions,
                        error: Some(unbalanced(tok.line, &lexed.directives)),
                    };
                };
                if paren_depth == 0 {
                    if let Some((name, first)) = function_name(toks, &chunk) {
                        let start_line = toks[first].line;
                        let end_line = toks[close].line;
                        let signature_text = source[toks[first].offset..tok.offset].trim().to_string();
                        functions.push(FunctionSpan {
                            fingerprint: fingerprint(span_text(source, &lines, start_line, end_line)),
                            name,
                            start_line,
                            end_line,
                            signature_text,
                        });
                        chunk.clear();
                        i = close + 1;
                        continue;
                    }
                }
                chunk.push(i);
                chunk.push(close);
                i = close + 1;
                continue;
            }
            TokenKind::Punct(b'}') => {
                return Scan {
                    functions,
                    error: Some(SpliceError::Unbalanced {
                        line: tok.line,
                        directive: None,
                    }),
                };
            }
            TokenKind::Punct(b'(') => paren_depth += 1,
            TokenKind::Punct(b')') => paren_depth = paren_depth.saturating_sub(1),
            TokenKind::Punct(b';') if paren_depth == 0 => {
                if knr_candidate(toks, &chunk) {
                    chunk.push(i);
                } else {
                    chunk.clear();
                }
                i += 1;
                continue;
            }
            _ => {}
        }
        chunk.push(i);
        i += 1;
    }
    Scan {
        functions,
        error: None,
    }
}

fn unbalanced(line: usize, directives: &[Directive]) -> SpliceError {
    let directive = directives
        .iter()
        .find(|d| d.line >= line && d.is_conditional())
        .map(|d| (d.line, d.text.clone()));
    SpliceError::Unbalanced { line, directive }
}

fn matching_brace(toks: &[Token<'_>], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (j, t) in toks.iter().enumerate().skip(open) {
        match t.kind {
            TokenKind::Punct(b'{') => depth += 1,
            TokenKind::Punct(b'}') => {
                depth -= 1;
                if depth == 0 {
                    return Some(j);
                }
            }
            _ => {}
        }
    }
    None
}

/// Top-level parenthesized groups of `chunk`, as (open, close) positions in `chunk`.
fn paren_groups(toks: &[Token<'_>], chunk: &[usize]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut depth = 0usize;
    let mut open = 0;
    for (pos, &ti) in chunk.iter().enumerate() {
        match toks[ti].kind {
            TokenKind::Punct(b'(') => {
                if depth == 0 {
                    open = pos;
                }
                depth += 1;
            }
            TokenKind::Punct(b')') if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    groups.push((open, pos));
                }
            }
            _ => {}
        }
    }
    groups
}

/// A `;` inside a chunk that started as `name(a, b) type a` is a K&R
/// parameter declaration, not the end of the construct.
fn knr_candidate(toks: &[Token<'_>], chunk: &[usize]) -> bool {
    let first_semi = chunk.iter().position(|&ti| toks[ti].is_punct(b';'));
    let head = &chunk[..first_semi.unwrap_or(chunk.len())];
    let groups = paren_groups(toks, head);
    let Some(&(open, close)) = groups.first() else {
        return false;
    };
    if groups.len() != 1 || open == 0 || !is_name_candidate(&toks[head[open - 1]]) {
        return false;
    }
    let inner = &head[open + 1..close];
    let ident_list = !inner.is_empty()
        && inner
            .iter()
            .all(|&ti| toks[ti].kind == TokenKind::Ident || toks[ti].is_punct(b','));
    if !ident_list || close + 1 >= head.len() {
        return false;
    }
    // Declarations after the first `;` must not open new parameter lists.
    chunk[head.len()..].iter().all(|&ti| !toks[ti].is_punct(b'('))
}

/// Declarator name of a function definition whose body starts right after
/// `chunk`, plus the token index where the definition begins.
fn function_name(toks: &[Token<'_>], chunk: &[usize]) -> Option<(String, usize)> {
    if chunk.is_empty() {
        return None;
    }
    let mut chunk = chunk;
    if let Some(semi) = chunk.iter().position(|&ti| toks[ti].is_punct(b';')) {
        let head = &chunk[..semi];
        let tail_has_parens = chunk[semi..].iter().any(|&ti| toks[ti].is_punct(b'('));
        if tail_has_parens || !knr_candidate(toks, chunk) {
            let last = chunk.iter().rposition(|&ti| toks[ti].is_punct(b';'))?;
            chunk = &chunk[last + 1..];
            if chunk.is_empty() {
                return None;
            }
        } else {
            // Name comes from the head; the parameter declarations follow it.
            let (name, _) = function_name(toks, head)?;
            return Some((name, chunk[0]));
        }
    }
    let first = toks[chunk[0]];
    if first.text == "typedef" {
        return None;
    }
    let mut depth = 0usize;
    for &ti in chunk {
        match toks[ti].kind {
            TokenKind::Punct(b'(') => depth += 1,
            TokenKind::Punct(b')') => depth = depth.saturating_sub(1),
            TokenKind::Punct(b'=') if depth == 0 => return None,
            // Brace groups already inside the chunk belong to struct/enum bodies.
            TokenKind::Punct(b'{') => return None,
            _ => {}
        }
    }
    let groups = paren_groups(toks, chunk);
    for &(open, _) in groups.iter().rev() {
        if open > 0 && is_name_candidate(&toks[chunk[open - 1]]) {
            return Some((toks[chunk[open - 1]].text.to_string(), chunk[0]));
        }
    }
    // `int (*name(args))(int)` style declarators.
    let &(open, close) = groups.first()?;
    let inner = &chunk[open + 1..close];
    inner
        .windows(2)
        .find(|w| is_name_candidate(&toks[w[0]]) && toks[w[1]].is_punct(b'('))
        .map(|w| (toks[w[0]].text.to_string(), chunk[0]))
}

/// The unique top-level definition of `name`.
pub fn locate_function(source: &str, name: &str) -> Result<FunctionSpan, SpliceError> {
    let functions = list_functions(source)?;
    let mut found: Vec<FunctionSpan> = functions.into_iter().filter(|f| f.name == name).collect();
    match found.len() {
        0 => Err(SpliceError::NotFound(name.to_string())),
        1 => Ok(found.remove(0)),
        count => Err(SpliceError::Ambiguous {
            name: name.to_string(),
            count,
        }),
    }
}

/// Byte ranges of each line, terminator included.
pub(crate) fn line_bounds(source: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for line in source.split_inclusive('\n') {
        out.push((start, start + line.len()));
        start += line.len();
    }
    out
}

fn span_text<'a>(source: &'a str, lines: &[(usize, usize)], start: usize, end: usize) -> &'a str {
    &source[lines[start - 1].0..lines[end - 1].1]
}

fn fingerprint(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}

/// Text of the spanned lines, including the closing line's terminator.
pub fn extract(source: &str, span: &FunctionSpan) -> Result<String, SpliceError> {
    let lines = line_bounds(source);
    check_span(source, &lines, span)?;
    Ok(span_text(source, &lines, span.start_line, span.end_line).to_string())
}

fn check_span(source: &str, lines: &[(usize, usize)], span: &FunctionSpan) -> Result<(), SpliceError> {
    if span.start_line == 0 || span.start_line > span.end_line || span.end_line > lines.len() {
        return Err(SpliceError::SpanStale);
    }
    if fingerprint(span_text(source, lines, span.start_line, span.end_line)) != span.fingerprint {
        return Err(SpliceError::SpanStale);
    }
    Ok(())
}

fn strip_one_terminator(text: &str) -> &str {
    text.strip_suffix("\r\n")
        .or_else(|| text.strip_suffix('\n'))
        .unwrap_or(text)
}

/// Replace lines `[span.start_line, span.end_line]` with `replacement`.
///
/// The replaced region keeps the original closing line's terminator, so a
/// replacement with or without a trailing newline splices identically.
pub fn splice(source: &str, span: &FunctionSpan, replacement: &str) -> Result<SplicedSource, SpliceError> {
    let lines = line_bounds(source);
    check_span(source, &lines, span)?;
    let region_start = lines[span.start_line - 1].0;
    let (last_start, region_end) = lines[span.end_line - 1];
    let last_line = &source[last_start..region_end];
    let terminator = &last_line[strip_one_terminator(last_line).len()..];

    let mut text = String::with_capacity(source.len() + replacement.len());
    text.push_str(&source[..region_start]);
    text.push_str(strip_one_terminator(replacement));
    text.push_str(terminator);
    text.push_str(&source[region_end..]);
    Ok(SplicedSource {
        text,
        site: SpliceSite::Span(span.clone()),
        mode: SpliceMode::Replace,
        structural_diff: None,
    })
}

fn is_footer_line(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#') || t.starts_with("//") || t.starts_with("/*") || t.starts_with('*')
}

/// Append `function_text` after the last top-level definition, ahead of a
/// trailing conditional-compilation footer (`#endif` of an include guard
/// and the like), separated by one blank line.
pub fn insert_function(source: &str, function_text: &str) -> Result<SplicedSource, SpliceError> {
    if !braces_balanced(function_text) {
        let line = lex(function_text)
            .tokens
            .iter()
            .find(|t| t.is_punct(b'{'))
            .map_or(1, |t| t.line);
        return Err(SpliceError::Unbalanced { line, directive: None });
    }
    let existing = list_functions(source)?;
    for new in list_functions(function_text)? {
        if existing.iter().any(|f| f.name == new.name) {
            return Err(SpliceError::AlreadyDefined(new.name));
        }
    }
    let body = strip_one_terminator(function_text);
    let eol = if source.contains("\r\n") { "\r\n" } else { "\n" };

    if source.is_empty() {
        return Ok(SplicedSource {
            text: format!("{body}{eol}"),
            site: SpliceSite::InsertAt { line: 1 },
            mode: SpliceMode::Insert,
            structural_diff: None,
        });
    }

    let lines: Vec<&str> = source.split_inclusive('\n').collect();
    let last_def_end = existing.last().map_or(0, |f| f.end_line);
    let mut footer_start = lines.len();
    while footer_start > last_def_end && is_footer_line(lines[footer_start - 1]) {
        footer_start -= 1;
    }
    let has_endif = lines[footer_start..]
        .iter()
        .any(|l| l.trim_start().starts_with('#') && l.contains("endif"));
    // Keep trailing blank lines with the body when there is no footer.
    let anchor = if has_endif {
        // Blank lines directly above the footer stay above the insertion.
        let mut k = footer_start;
        while k < lines.len() && lines[k].trim().is_empty() {
            k += 1;
        }
        k
    } else {
        lines.len()
    };

    let mut text = String::with_capacity(source.len() + function_text.len() + 4);
    for l in &lines[..anchor] {
        text.push_str(l);
    }
    if !text.is_empty() && !text.ends_with('\n') {
        text.push_str(eol);
    }
    let ends_blank = text.ends_with("\n\n") || text.ends_with("\n\r\n") || text.trim().is_empty();
    if !ends_blank {
        text.push_str(eol);
    }
    let insert_line = text.split_inclusive('\n').count() + 1;
    text.push_str(body);
    text.push_str(eol);
    for l in &lines[anchor..] {
        text.push_str(l);
    }
    Ok(SplicedSource {
        text,
        site: SpliceSite::InsertAt { line: insert_line },
        mode: SpliceMode::Insert,
        structural_diff: None,
    })
}

/// Take a model-produced whole file as the candidate, recording what it
/// changed relative to `pre` so that unrelated deletions can be flagged.
pub fn adopt_whole_file(pre: &str, candidate_file: &str, target_function: &str) -> SplicedSource {
    SplicedSource {
        text: candidate_file.to_string(),
        site: SpliceSite::WholeFile,
        mode: SpliceMode::WholeFileAdopt,
        structural_diff: Some(structural_diff(pre, candidate_file, target_function)),
    }
}

/// Collapse runs of whitespace so that formatting-only differences vanish.
/// Comments are kept: a changed comment is a real difference.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIZE_FN: &str = "unsigned int json_object_size(const json_t *json)\n{\n    json_object_t *object;\n    if(!json_is_object(json))\n        return -1;\n\n    object = json_to_object(json);\n    return object->hashtable.size;\n}\n";

    #[test]
    fn locates_nine_line_function() {
        let span = locate_function(SIZE_FN, "json_object_size").unwrap();
        assert_eq!((span.start_line, span.end_line), (1, 9));
    }

    #[test]
    fn absent_name_is_not_found() {
        assert_eq!(
            locate_function(SIZE_FN, "json_array_size"),
            Err(SpliceError::NotFound("json_array_size".into()))
        );
    }

    #[test]
    fn both_conditional_branches_are_ambiguous() {
        let src = "#if USE_FAST\nint pick(int a)\n{\n    return a;\n}\n#else\nint pick(int a)\n{\n    return a + 1;\n}\n#endif\n";
        assert_eq!(
            locate_function(src, "pick"),
            Err(SpliceError::Ambiguous {
                name: "pick".into(),
                count: 2
            })
        );
    }

    #[test]
    fn unbalanced_names_the_directive() {
        let src = "int f(void)\n{\n#if A\n    if (x) {\n#else\n    if (y) {\n#endif\n        g();\n    }\n}\n";
        match list_functions(src) {
            Err(SpliceError::Unbalanced { line, directive }) => {
                assert_eq!(line, 2);
                assert_eq!(directive.unwrap().0, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn skips_structs_initializers_prototypes() {
        let src = "struct point { int x; int y; };\nstatic const int table[] = { 1, 2 };\nint proto(int a);\ntypedef struct { int a; } pair;\nenum color { RED = (1 << 0) };\nstatic int real(int a) { return a; }\n";
        let names: Vec<_> = list_functions(src).unwrap().into_iter().map(|f| f.name).collect();
        assert_eq!(names, vec!["real"]);
    }

    #[test]
    fn knr_definition() {
        let src = "int add(a, b)\n    int a;\n    int b;\n{\n    return a + b;\n}\n";
        let span = locate_function(src, "add").unwrap();
        assert_eq!((span.start_line, span.end_line), (1, 6));
    }

    #[test]
    fn prototype_before_definition_is_not_merged() {
        let src = "int helper(int x);\nint main(void)\n{\n    return helper(1);\n}\n";
        let span = locate_function(src, "main").unwrap();
        assert_eq!(span.start_line, 2);
    }

    #[test]
    fn attribute_and_pointer_returning_declarators() {
        let src = "__attribute__((unused)) static int quiet(void) { return 0; }\nstruct node *make_node(int v)\n{\n    return 0;\n}\nint (*pick_handler(int k))(int)\n{\n    return 0;\n}\n";
        let names: Vec<_> = list_functions(src).unwrap().into_iter().map(|f| f.name).collect();
        assert_eq!(names, vec!["quiet", "make_node", "pick_handler"]);
    }

    #[test]
    fn macro_generated_definition_is_not_found() {
        let src = "DEFINE_GETTER(width)\n{\n    return 1;\n}\n";
        assert!(matches!(locate_function(src, "width"), Err(SpliceError::NotFound(_))));
    }

    #[test]
    fn identity_splice() {
        let span = locate_function(SIZE_FN, "json_object_size").unwrap();
        let text = extract(SIZE_FN, &span).unwrap();
        assert_eq!(splice(SIZE_FN, &span, &text).unwrap().text, SIZE_FN);
    }

    #[test]
    fn splice_without_trailing_newline_keeps_convention() {
        let src = "int a;\nint f(void)\n{\n    return 1;\n}\nint b;\n";
        let span = locate_function(src, "f").unwrap();
        let out = splice(src, &span, "int f(void)\n{\n    return 2;\n}").unwrap();
        assert_eq!(out.text, "int a;\nint f(void)\n{\n    return 2;\n}\nint b;\n");
        assert_eq!(out.mode, SpliceMode::Replace);

        // A file without a final newline stays without one.
        let src = "int f(void) { return 1; }";
        let span = locate_function(src, "f").unwrap();
        let out = splice(src, &span, "int f(void) { return 2; }\n").unwrap();
        assert_eq!(out.text, "int f(void) { return 2; }");
    }

    #[test]
    fn stale_span_is_rejected() {
        let src = "int f(void)\n{\n    return 1;\n}\n";
        let span = locate_function(src, "f").unwrap();
        let edited = src.replace("return 1", "return 7");
        assert_eq!(splice(&edited, &span, "x"), Err(SpliceError::SpanStale));
    }

    #[test]
    fn insert_into_empty_file() {
        let out = insert_function("", "int f(void) { return 0; }").unwrap();
        assert_eq!(out.text, "int f(void) { return 0; }\n");
    }

    #[test]
    fn insert_existing_name_is_rejected() {
        let src = "int f(void) { return 0; }\n";
        assert_eq!(
            insert_function(src, "int f(void) { return 1; }"),
            Err(SpliceError::AlreadyDefined("f".into()))
        );
    }

    #[test]
    fn insert_nine_lines_into_hundred() {
        let mut src = String::new();
        for i in 0..25 {
            src.push_str(&format!("int g{i}(void)\n{{\n    return {i};\n}}\n"));
        }
        assert_eq!(src.lines().count(), 100);
        let out = insert_function(&src, SIZE_FN).unwrap();
        assert_eq!(out.text.lines().count(), 110);
        assert!(out.text.starts_with(&src));
        assert_eq!(out.site, SpliceSite::InsertAt { line: 102 });
    }

    #[test]
    fn insert_before_include_guard_footer() {
        let src = "#ifndef X_H\n#define X_H\nint f(void) { return 0; }\n\n#endif /* X_H */\n";
        let out = insert_function(src, "int g(void) { return 1; }").unwrap();
        assert_eq!(
            out.text,
            "#ifndef X_H\n#define X_H\nint f(void) { return 0; }\n\nint g(void) { return 1; }\n#endif /* X_H */\n"
        );
    }

    #[test]
    fn insert_unbalanced_is_rejected() {
        assert!(matches!(
            insert_function("", "int f(void) { return 0;"),
            Err(SpliceError::Unbalanced { .. })
        ));
    }

    #[test]
    fn whitespace_normalization() {
        assert_eq!(normalize_whitespace("  a\t b \n\n c  "), "a b c");
        assert_ne!(normalize_whitespace("a /* x */"), normalize_whitespace("a /* y */"));
    }
}
