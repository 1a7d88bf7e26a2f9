//! A small lexical scanner for C source text.
//!
//! It does not understand the grammar. It only produces enough structure to
//! find top-level function definitions: identifiers, single-character
//! punctuation, and opaque tokens for literals and numbers. Comments and
//! preprocessor directive lines are skipped, and their contents never
//! produce brace tokens.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokenKind {
    Ident,
    Punct(u8),
    /// String/char literal, number, or any other run of characters.
    Opaque,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    /// 1-based line of the first byte.
    pub line: usize,
    pub offset: usize,
}

impl Token<'_> {
    pub fn is_punct(&self, c: u8) -> bool {
        self.kind == TokenKind::Punct(c)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Directive {
    pub line: usize,
    pub text: String,
}

impl Directive {
    /// Opens a conditional block (`#if`, `#ifdef`, `#ifndef`).
    #[cfg(test)]
    pub fn is_conditional_open(&self) -> bool {
        let word = self.keyword();
        word == "if" || word == "ifdef" || word == "ifndef"
    }

    pub fn is_conditional(&self) -> bool {
        matches!(
            self.keyword(),
            "if" | "ifdef" | "ifndef" | "elif" | "else" | "endif"
        )
    }

    pub fn keyword(&self) -> &str {
        let rest = self.text.trim_start().trim_start_matches('#').trim_start();
        let end = rest
            .find(|c: char| !c.is_ascii_alphanumeric() && c != '_')
            .unwrap_or(rest.len());
        &rest[..end]
    }
}

#[derive(Debug, Default)]
pub(crate) struct Lexed<'a> {
    pub tokens: Vec<Token<'a>>,
    pub directives: Vec<Directive>,
}

pub(crate) fn lex(src: &str) -> Lexed<'_> {
    let bytes = src.as_bytes();
    let mut out = Lexed::default();
    let mut i = 0;
    let mut line = 1;
    // Only whitespace seen since the last newline.
    let mut at_line_start = true;

    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'\n' => {
                line += 1;
                at_line_start = true;
                i += 1;
            }
            b' ' | b'\t' | b'\r' | 0x0b | 0x0c => i += 1,
            b'\\' if bytes.get(i + 1) == Some(&b'\n') => {
                line += 1;
                i += 2;
            }
            b'#' if at_line_start => {
                let start = i;
                let start_line = line;
                while i < bytes.len() && bytes[i] != b'\n' {
                    if bytes[i] == b'\\' && bytes.get(i + 1) == Some(&b'\n') {
                        line += 1;
                        i += 2;
                        continue;
                    }
                    // A block comment may run past the end of the directive line.
                    if bytes[i] == b'/' && bytes.get(i + 1) == Some(&b'*') {
                        i = skip_block_comment(bytes, i, &mut line);
                        continue;
                    }
                    if bytes[i] == b'/' && bytes.get(i + 1) == Some(&b'/') {
                        while i < bytes.len() && bytes[i] != b'\n' {
                            i += 1;
                        }
                        break;
                    }
                    i += 1;
                }
                out.directives.push(Directive {
                    line: start_line,
                    text: src[start..i].to_string(),
                });
            }
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    // Line splices extend a // comment onto the next line.
                    if bytes[i] == b'\\' && bytes.get(i + 1) == Some(&b'\n') {
                        line += 1;
                        i += 2;
                        continue;
                    }
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                i = skip_block_comment(bytes, i, &mut line);
            }
            b'"' | b'\'' => {
                let start = i;
                let start_line = line;
                i = skip_literal(bytes, i, &mut line);
                out.tokens.push(Token {
                    kind: TokenKind::Opaque,
                    text: &src[start..i],
                    line: start_line,
                    offset: start,
                });
                at_line_start = false;
            }
            c if c == b'_' || c.is_ascii_alphabetic() || c >= 0x80 => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric() || bytes[i] >= 0x80)
                {
                    i += 1;
                }
                out.tokens.push(Token {
                    kind: TokenKind::Ident,
                    text: &src[start..i],
                    line,
                    offset: start,
                });
                at_line_start = false;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.' || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.tokens.push(Token {
                    kind: TokenKind::Opaque,
                    text: &src[start..i],
                    line,
                    offset: start,
                });
                at_line_start = false;
            }
            _ => {
                out.tokens.push(Token {
                    kind: TokenKind::Punct(c),
                    text: &src[i..i + 1],
                    line,
                    offset: i,
                });
                at_line_start = false;
                i += 1;
            }
        }
    }
    out
}

fn skip_block_comment(bytes: &[u8], mut i: usize, line: &mut usize) -> usize {
    i += 2;
    while i < bytes.len() {
        if bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/') {
            return i + 2;
        }
        if bytes[i] == b'\n' {
            *line += 1;
        }
        i += 1;
    }
    i
}

/// Skips a string or character literal starting at `i`. An unescaped newline
/// terminates the literal so that a stray quote cannot swallow the file.
fn skip_literal(bytes: &[u8], mut i: usize, line: &mut usize) -> usize {
    let quote = bytes[i];
    i += 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => {
                if bytes.get(i + 1) == Some(&b'\n') {
                    *line += 1;
                }
                i += 2;
            }
            b'\n' => return i,
            c if c == quote => return i + 1,
            _ => i += 1,
        }
    }
    i.min(bytes.len())
}

/// Brace balance of `src` ignoring braces in comments, literals and
/// directive lines. `true` when every `{` closes and no `}` is unmatched.
pub(crate) fn braces_balanced(src: &str) -> bool {
    let mut depth: i64 = 0;
    for tok in lex(src).tokens {
        match tok.kind {
            TokenKind::Punct(b'{') => depth += 1,
            TokenKind::Punct(b'}') => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn braces(src: &str) -> Vec<(u8, usize)> {
        lex(src)
            .tokens
            .iter()
            .filter_map(|t| match t.kind {
                TokenKind::Punct(c @ (b'{' | b'}')) => Some((c, t.line)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn braces_in_strings_and_comments_are_ignored() {
        let src = "int f(void) {\n  char *s = \"{\"; /* } */\n  // {\n  char c = '}';\n}\n";
        assert_eq!(braces(src), vec![(b'{', 1), (b'}', 5)]);
    }

    #[test]
    fn escaped_quote_does_not_end_literal() {
        let src = "x = \"a\\\"{\"; {";
        assert_eq!(braces(src), vec![(b'{', 1)]);
    }

    #[test]
    fn directives_are_collected_not_tokenized() {
        let lexed = lex("#define OPEN {\n#if X\nint a;\n#endif\n");
        assert_eq!(lexed.directives.len(), 3);
        assert!(lexed.directives[1].is_conditional_open());
        assert_eq!(lexed.directives[2].keyword(), "endif");
        assert!(lexed.tokens.iter().all(|t| !t.is_punct(b'{')));
    }

    #[test]
    fn hash_inside_expression_is_punct() {
        let lexed = lex("a # b\n");
        assert!(lexed.directives.is_empty());
    }

    #[test]
    fn line_numbers_track_multiline_comments() {
        let lexed = lex("/*\n\n*/ x\n");
        assert_eq!(lexed.tokens[0].line, 3);
    }

    #[test]
    fn balance_check() {
        assert!(braces_balanced("int f() { if (x) { } }"));
        assert!(!braces_balanced("int f() { if (x) { }"));
        assert!(!braces_balanced("}{"));
        assert!(braces_balanced("char *s = \"}\";"));
    }
}
