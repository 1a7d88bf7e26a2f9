use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::categorize::FRONTEND_PREFIX;
use super::{Diagnostic, Severity};

/// Paths inside `root` become relative; anything else is kept verbatim.
pub(crate) fn relativize(path: &str, root: &Path) -> String {
    let p = path.strip_prefix("file://").unwrap_or(path);
    let p = Path::new(p);
    let rel = if p.is_absolute() {
        let canon_root = root.canonicalize().unwrap_or_else(|_| root.to_path_buf());
        p.strip_prefix(&canon_root)
            .or_else(|_| p.strip_prefix(root))
            .map(|r| r.to_path_buf())
            .unwrap_or_else(|_| p.to_path_buf())
    } else {
        p.to_path_buf()
    };
    let s = rel.to_string_lossy().into_owned();
    s.strip_prefix("./").map(str::to_string).unwrap_or(s)
}

/// Results of one analyzer SARIF file.
pub(crate) fn parse_sarif(text: &str, root: &Path) -> Result<Vec<Diagnostic>, String> {
    let v: Value = serde_json::from_str(text).map_err(|e| format!("invalid SARIF: {e}"))?;
    let runs = v["runs"].as_array().ok_or("SARIF without runs")?;
    let mut out = Vec::new();
    for run in runs {
        for r in run["results"].as_array().into_iter().flatten() {
            let checker_id = r["ruleId"].as_str().unwrap_or("unknown").to_string();
            let message = r["message"]["text"].as_str().unwrap_or_default().to_string();
            let loc = &r["locations"][0]["physicalLocation"];
            let uri = loc["artifactLocation"]["uri"].as_str().unwrap_or_default();
            let line = loc["region"]["startLine"].as_u64().unwrap_or(1).max(1) as usize;
            let severity = match r["level"].as_str() {
                Some("error") => Severity::Error,
                _ => Severity::Warning,
            };
            out.push(Diagnostic {
                tool: "clang-analyzer".into(),
                checker_id,
                message,
                file: relativize(&percent_decode(uri), root),
                line,
                severity,
            });
        }
    }
    Ok(out)
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            if let Some(b) = std::str::from_utf8(&bytes[i + 1..i + 3])
                .ok()
                .and_then(|h| u8::from_str_radix(h, 16).ok())
            {
                out.push(b);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

fn diag_line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?P<file>[^:\s][^:]*):(?P<line>\d+):(?:(?P<col>\d+):)?\s*(?P<sev>warning|error|fatal error):\s*(?P<msg>.*?)(?:\s+\[(?P<tag>[^\]]+)\])?\s*$")
            .expect("valid regex")
    })
}

/// `file:line:col: severity: message [tag]` lines from compiler or analyzer
/// text output. With `analyzer = true` the tag is the checker id; otherwise
/// it names the warning flag.
pub(crate) fn parse_text(text: &str, root: &Path, analyzer: bool) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for line in text.lines() {
        let Some(c) = diag_line_regex().captures(line) else { continue };
        let sev = &c["sev"];
        let severity = if sev == "warning" { Severity::Warning } else { Severity::Error };
        let tag = c.name("tag").map(|m| m.as_str());
        let (tool, checker_id) = if analyzer {
            match tag {
                Some(t) if !t.starts_with("-W") => ("clang-analyzer", t.to_string()),
                _ => continue,
            }
        } else {
            let flag = tag.and_then(|t| {
                t.split(',')
                    .map(str::trim)
                    .filter(|f| f.starts_with("-W") && *f != "-Werror")
                    .last()
                    .map(|f| f.trim_start_matches("-W").trim_start_matches("error=").to_string())
            });
            let id = match flag {
                Some(f) => format!("{FRONTEND_PREFIX}{f}"),
                None if severity == Severity::Error => format!("{FRONTEND_PREFIX}error"),
                None => format!("{FRONTEND_PREFIX}warning"),
            };
            ("clang", id)
        };
        out.push(Diagnostic {
            tool: tool.into(),
            checker_id,
            message: c["msg"].to_string(),
            file: relativize(&c["file"], root),
            line: c["line"].parse::<usize>().unwrap_or(1).max(1),
            severity,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn front_end_lines() {
        let root = Path::new("/work/tree");
        let text = "\
value.c:12:12: error: use of undeclared identifier 'hashtable_size'
    return hashtable_size(&object->hashtable);
           ^
strbuf.c:40:16: warning: incompatible integer to pointer conversion assigning to 'char *' from 'char'; take the address with & [-Wint-conversion]
util.c:3:5: error: call to undeclared function 'foo'; ISO C99 and later do not support implicit function declarations [-Werror,-Wimplicit-function-declaration]
make: *** [Makefile:7: value.o] Error 1
/work/tree/src/x.c:9:1: error: expected '}'
";
        let d = parse_text(text, root, false);
        assert_eq!(d.len(), 4);
        assert_eq!(d[0].checker_id, "clang-diagnostic-error");
        assert_eq!(d[0].line, 12);
        assert_eq!(d[1].checker_id, "clang-diagnostic-int-conversion");
        assert_eq!(d[1].severity, Severity::Warning);
        assert_eq!(d[2].checker_id, "clang-diagnostic-implicit-function-declaration");
        assert_eq!(d[3].file, "src/x.c");
        assert_eq!(d[3].message, "expected '}'");
    }

    #[test]
    fn analyzer_text_lines() {
        let text = "a.c:2:32: warning: Dereference of null pointer (loaded from variable 'p') [core.NullDereference]\n1 warning generated.\n";
        let d = parse_text(text, Path::new("/"), true);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].checker_id, "core.NullDereference");
        assert_eq!(d[0].message, "Dereference of null pointer (loaded from variable 'p')");
    }

    #[test]
    fn sarif_results() {
        let sarif = r#"{"runs":[{"results":[{"ruleId":"core.NullDereference","message":{"text":"Dereference of null pointer"},"locations":[{"physicalLocation":{"artifactLocation":{"uri":"file:///w/t/my%20dir/a.c"},"region":{"startLine":2}}}]}]}]}"#;
        let d = parse_sarif(sarif, Path::new("/w/t")).unwrap();
        assert_eq!(d[0].file, "my dir/a.c");
        assert_eq!(d[0].line, 2);
        assert!(parse_sarif("not json", Path::new("/")).is_err());
    }
}
