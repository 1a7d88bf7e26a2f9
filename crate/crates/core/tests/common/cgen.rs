//! Random C translation units for splicer properties and benches. Each one
//! mixes function definitions with the things that confuse brace counting:
//! braces in strings, chars and comments, initializer lists, prototypes,
//! struct definitions and preprocessor lines.

use rand::seq::SliceRandom;
use rand::Rng;

pub struct GeneratedFile {
    pub source: String,
    pub functions: Vec<String>,
}

const NOISE: &[&str] = &[
    "    const char *s = \"}{ not a brace }\";\n",
    "    char c = '{';\n",
    "    char d = '}';\n",
    "    char q = '\\'';\n",
    "    /* } closing in a comment { */\n",
    "    // stray } in a line comment\n",
    "    int arr[3] = { 1, 2, 3 };\n",
    "    const char *esc = \"\\\"}\\\"\";\n",
    "    struct point pt = { .x = 1, .y = 2 };\n",
    "    /* multi-line comment\n       with a } and a { inside */\n",
];

const TOP_NOISE: &[&str] = &[
    "#define BLOCK(x) do { (x); } while (0)\n",
    "static const char *banner = \"{{ banner }}\";\n",
    "/* } top-level comment with braces { */\n",
    "int table[] = { 4, 5, 6 };\n",
    "struct point { int x; int y; };\n",
    "extern int declared_elsewhere(int a);\n",
    "// }}} folding marker\n",
    "typedef struct { int a; } anon_t;\n",
];

fn body<R: Rng>(rng: &mut R, depth: usize, out: &mut String, indent: usize) {
    let pad = " ".repeat(indent);
    for _ in 0..rng.gen_range(1..5) {
        match rng.gen_range(0..5) {
            0 if depth < 3 => {
                out.push_str(&format!("{pad}if (n > {}) {{\n", rng.gen_range(0..100)));
                body(rng, depth + 1, out, indent + 4);
                out.push_str(&format!("{pad}}}\n"));
            }
            1 if depth < 3 => {
                out.push_str(&format!("{pad}switch (n) {{\n{pad}case 1: {{\n"));
                body(rng, depth + 1, out, indent + 4);
                out.push_str(&format!("{pad}    break;\n{pad}}}\n{pad}default:\n{pad}    break;\n{pad}}}\n"));
            }
            2 => out.push_str(NOISE.choose(rng).unwrap()),
            _ => out.push_str(&format!("{pad}n = n * {} + 1;\n", rng.gen_range(1..9))),
        }
    }
}

pub fn generate<R: Rng>(rng: &mut R) -> GeneratedFile {
    let mut source = String::from("#include <stdio.h>\n\n");
    let mut functions = Vec::new();
    let count = rng.gen_range(1..7);
    for i in 0..count {
        if rng.gen_bool(0.6) {
            source.push_str(TOP_NOISE.choose(rng).unwrap());
            source.push('\n');
        }
        let name = format!("fn_{i}_{}", rng.gen_range(0..1000));
        let brace_on_own_line = rng.gen_bool(0.5);
        let storage = if rng.gen_bool(0.3) { "static " } else { "" };
        source.push_str(&format!("{storage}int {name}(int n)"));
        source.push_str(if brace_on_own_line { "\n{\n" } else { " {\n" });
        body(rng, 0, &mut source, 4);
        source.push_str("    return n;\n}\n\n");
        functions.push(name);
    }
    if rng.gen_bool(0.3) {
        source.push_str("/* trailer */\n");
    }
    // Some files end without a final newline, some with CRLF line ends.
    if rng.gen_bool(0.2) {
        source = source.trim_end().to_string();
    }
    if rng.gen_bool(0.15) {
        source = source.replace('\n', "\r\n");
    }
    GeneratedFile { source, functions }
}
