//! Structural checks on emitted Verilog.
//!
//! Not a parser. It handles the subset the emitter produces: balanced
//! block keywords, every referenced identifier declared in its module, and
//! every instantiation naming a known module and real ports.

use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LintIssue {
    pub file: String,
    pub message: String,
}

impl std::fmt::Display for LintIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.file, self.message)
    }
}

const KEYWORDS: &[&str] = &[
    "module",
    "endmodule",
    "input",
    "output",
    "inout",
    "wire",
    "reg",
    "integer",
    "signed",
    "localparam",
    "parameter",
    "assign",
    "always",
    "posedge",
    "negedge",
    "or",
    "begin",
    "end",
    "if",
    "else",
    "case",
    "endcase",
    "default",
    "for",
];

const DECLARATORS: &[&str] = &[
    "input",
    "output",
    "inout",
    "wire",
    "reg",
    "integer",
    "localparam",
    "parameter",
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number,
    Sym(char),
}

/// Drop `//` and `/* */` comments.
pub fn strip_comments(src: &str) -> String {
    let mut out = String::with_capacity(src.len());
    let b = src.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'/' && b.get(i + 1) == Some(&b'/') {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else if b[i] == b'/' && b.get(i + 1) == Some(&b'*') {
            i += 2;
            while i < b.len() && !(b[i] == b'*' && b.get(i + 1) == Some(&b'/')) {
                i += 1;
            }
            i += 2;
        } else {
            out.push(b[i] as char);
            i += 1;
        }
    }
    out
}

fn tokenize(src: &str) -> Vec<Tok> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$')
            {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            // System functions such as $signed are not signals.
            if !word.starts_with('$') {
                toks.push(Tok::Ident(word));
            }
        } else if c.is_ascii_digit() || c == '\'' {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '\'' {
                i += 1;
                if i < chars.len() && matches!(chars[i], 's' | 'S') {
                    i += 1;
                }
                if i < chars.len() && "bBoOdDhH".contains(chars[i]) {
                    i += 1;
                }
                while i < chars.len()
                    && (chars[i].is_ascii_hexdigit() || "_xXzZ".contains(chars[i]))
                {
                    i += 1;
                }
            }
            toks.push(Tok::Number);
        } else {
            toks.push(Tok::Sym(c));
            i += 1;
        }
    }
    toks
}

struct Module {
    file: String,
    ports: BTreeSet<String>,
    body: Vec<Tok>,
}

fn ident(t: Option<&Tok>) -> Option<&str> {
    match t {
        Some(Tok::Ident(s)) => Some(s),
        _ => None,
    }
}

/// Names declared by the declaration starting at `toks[i]` (a declarator
/// keyword). Returns the names and the index just past the statement.
fn declared_names(toks: &[Tok], mut i: usize) -> (Vec<String>, usize) {
    let mut names = Vec::new();
    i += 1;
    loop {
        // Skip type words and ranges.
        while let Some(t) = toks.get(i) {
            match t {
                Tok::Ident(w) if matches!(w.as_str(), "wire" | "reg" | "signed") => i += 1,
                Tok::Sym('[') => {
                    while i < toks.len() && toks[i] != Tok::Sym(']') {
                        i += 1;
                    }
                    i += 1;
                }
                _ => break,
            }
        }
        match ident(toks.get(i)) {
            Some(name) if !DECLARATORS.contains(&name) => {
                names.push(name.to_string());
                i += 1;
            }
            _ => return (names, i),
        }
        // Array dimension, initializer, then `,` or terminator.
        let mut depth = 0i32;
        while let Some(t) = toks.get(i) {
            match t {
                Tok::Sym('(' | '[' | '{') => depth += 1,
                Tok::Sym(')' | ']' | '}') if depth > 0 => depth -= 1,
                Tok::Sym(',') if depth == 0 => break,
                Tok::Sym(';' | ')') if depth == 0 => return (names, i + 1),
                _ => {}
            }
            i += 1;
        }
        i += 1;
        // A port list continues with the next direction keyword.
        if matches!(ident(toks.get(i)), Some(w) if DECLARATORS.contains(&w)) {
            i += 1;
        }
    }
}

fn split_modules(file: &str, toks: Vec<Tok>, issues: &mut Vec<LintIssue>) -> Vec<(String, Module)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if ident(toks.get(i)) != Some("module") {
            if ident(toks.get(i)) == Some("endmodule") {
                issues.push(issue(file, "endmodule without module"));
            }
            i += 1;
            continue;
        }
        let Some(name) = ident(toks.get(i + 1)).map(str::to_string) else {
            issues.push(issue(file, "module without a name"));
            i += 1;
            continue;
        };
        let end = toks[i..]
            .iter()
            .position(|t| *t == Tok::Ident("endmodule".into()))
            .map(|p| i + p);
        let Some(end) = end else {
            issues.push(issue(file, &format!("module {name} has no endmodule")));
            break;
        };
        if let Some(p) = toks[i + 1..end]
            .iter()
            .position(|t| *t == Tok::Ident("module".into()))
        {
            let _ = p;
            issues.push(issue(
                file,
                &format!("module {name} is not closed before the next module"),
            ));
        }
        let mut ports = BTreeSet::new();
        let mut j = i + 2;
        if toks.get(j) == Some(&Tok::Sym('(')) {
            if matches!(ident(toks.get(j + 1)), Some(w) if DECLARATORS.contains(&w)) {
                let (names, next) = declared_names(&toks, j + 1);
                ports.extend(names);
                j = next;
            } else {
                j += 1;
            }
        }
        out.push((
            name,
            Module {
                file: file.to_string(),
                ports,
                body: toks[j..end].to_vec(),
            },
        ));
        i = end + 1;
    }
    out
}

fn issue(file: &str, message: &str) -> LintIssue {
    LintIssue {
        file: file.to_string(),
        message: message.to_string(),
    }
}

fn check_balance(file: &str, toks: &[Tok], issues: &mut Vec<LintIssue>) {
    let mut stack: Vec<&str> = Vec::new();
    for t in toks {
        let (open, close) = match t {
            Tok::Ident(w) => match w.as_str() {
                "begin" => ("begin", None),
                "case" => ("case", None),
                "end" => ("", Some("begin")),
                "endcase" => ("", Some("case")),
                _ => continue,
            },
            Tok::Sym('(') => ("(", None),
            Tok::Sym('[') => ("[", None),
            Tok::Sym('{') => ("{", None),
            Tok::Sym(')') => ("", Some("(")),
            Tok::Sym(']') => ("", Some("[")),
            Tok::Sym('}') => ("", Some("{")),
            _ => continue,
        };
        match close {
            None => stack.push(open),
            Some(want) => {
                if stack.pop() != Some(want) {
                    issues.push(issue(file, &format!("unbalanced `{want}`")));
                    return;
                }
            }
        }
    }
    if let Some(open) = stack.pop() {
        issues.push(issue(file, &format!("unclosed `{open}`")));
    }
}

/// Lint a set of Verilog files that together form one design.
pub fn lint_verilog(files: &BTreeMap<String, String>) -> Vec<LintIssue> {
    let mut issues = Vec::new();
    let mut modules: BTreeMap<String, Module> = BTreeMap::new();
    for (file, src) in files {
        let toks = tokenize(&strip_comments(src));
        check_balance(file, &toks, &mut issues);
        for (name, m) in split_modules(file, toks, &mut issues) {
            if modules.contains_key(&name) {
                issues.push(issue(file, &format!("module {name} defined twice")));
            }
            modules.insert(name, m);
        }
    }

    for (name, m) in &modules {
        let body = &m.body;
        let mut declared = m.ports.clone();
        let mut skip = BTreeSet::new();
        for (i, t) in body.iter().enumerate() {
            if let Tok::Ident(w) = t {
                if DECLARATORS.contains(&w.as_str()) {
                    let (names, _) = declared_names(body, i);
                    declared.extend(names);
                }
            }
        }
        for i in 0..body.len() {
            let (Some(a), Some(b)) = (ident(body.get(i)), ident(body.get(i + 1))) else {
                continue;
            };
            if KEYWORDS.contains(&a) || KEYWORDS.contains(&b) {
                continue;
            }
            if body.get(i + 2) != Some(&Tok::Sym('(')) {
                continue;
            }
            skip.insert(i);
            skip.insert(i + 1);
            let Some(target) = modules.get(a) else {
                issues.push(issue(&m.file, &format!("{name}: unknown module `{a}`")));
                continue;
            };
            let mut depth = 0;
            for (k, t) in body.iter().enumerate().skip(i + 2) {
                match t {
                    Tok::Sym('(') => depth += 1,
                    Tok::Sym(')') => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    Tok::Sym('.') if depth == 1 => {
                        if let Some(port) = ident(body.get(k + 1)) {
                            skip.insert(k + 1);
                            if !target.ports.contains(port) {
                                issues.push(issue(
                                    &m.file,
                                    &format!("{name}: module {a} has no port `{port}`"),
                                ));
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        for (i, t) in body.iter().enumerate() {
            if let Tok::Ident(w) = t {
                if !skip.contains(&i) && !KEYWORDS.contains(&w.as_str()) && !declared.contains(w) {
                    issues.push(issue(&m.file, &format!("{name}: undeclared signal `{w}`")));
                    // One report per name is enough.
                    declared.insert(w.clone());
                }
            }
        }
    }
    issues
}
