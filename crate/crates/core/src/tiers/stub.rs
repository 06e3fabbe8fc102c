//! Syntactic detection of stubbed `resample_history` implementations.
//!
//! A resampler is a stub when it has at least one `return` and every
//! `return` in its own body (nested functions excluded) yields one of:
//!
//! - nothing or `None`
//! - an empty list, `[]` or `list()`
//! - a list of constants, e.g. `["deal:J", "Check"]`
//! - an echo of the input history, `[a for _, a in history]`,
//!   optionally filtered and optionally indexing the loop variable
//!
//! The source is tokenized with a small Python lexer so comments,
//! docstrings and string contents never influence the verdict.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubCheck {
    pub stub: bool,
    pub diagnostic: Option<String>,
}

/// Fail-open: missing or unparseable source is not a stub.
pub fn detect_stub(source: Option<&str>) -> StubCheck {
    let Some(source) = source else {
        return StubCheck {
            stub: false,
            diagnostic: Some("resampler source unavailable; stub check skipped".to_string()),
        };
    };
    match analyze(source) {
        Ok(stub) => StubCheck {
            stub,
            diagnostic: stub.then(|| "resample_history only returns trivial values".to_string()),
        },
        Err(msg) => StubCheck {
            stub: false,
            diagnostic: Some(format!("stub check skipped: {msg}")),
        },
    }
}

pub fn is_stub(source: &str) -> bool {
    analyze(source).unwrap_or(false)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Num,
    Str,
    Op(char),
}

impl Tok {
    fn is_op(&self, c: char) -> bool {
        matches!(self, Tok::Op(x) if *x == c)
    }

    fn is_name(&self, s: &str) -> bool {
        matches!(self, Tok::Name(x) if x == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Line {
    indent: usize,
    toks: Vec<Tok>,
}

fn tokenize(src: &str) -> Result<Vec<Line>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut lines = Vec::new();
    let mut toks: Vec<Tok> = Vec::new();
    let mut depth = 0usize;
    let mut at_line_start = true;
    let mut indent = 0usize;
    let mut i = 0usize;
    let flush = |toks: &mut Vec<Tok>, lines: &mut Vec<Line>, indent: usize| {
        if !toks.is_empty() {
            lines.push(Line {
                indent,
                toks: std::mem::take(toks),
            });
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if at_line_start {
            let mut col = 0;
            while i < chars.len() && (chars[i] == ' ' || chars[i] == '\t' || chars[i] == '\x0c') {
                col = if chars[i] == '\t' { (col / 8 + 1) * 8 } else { col + 1 };
                i += 1;
            }
            indent = col;
            at_line_start = false;
            continue;
        }
        match c {
            '\n' => {
                i += 1;
                if depth == 0 {
                    flush(&mut toks, &mut lines, indent);
                    at_line_start = true;
                }
            }
            '\\' if chars.get(i + 1) == Some(&'\n') => i += 2,
            '\\' if chars.get(i + 1) == Some(&'\r') => i += 3,
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            c if c.is_whitespace() => i += 1,
            '\'' | '"' => {
                i = skip_string(&chars, i)?;
                toks.push(Tok::Str);
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let is_prefix = word.len() <= 2
                    && word.chars().all(|c| "rRbBuUfF".contains(c))
                    && matches!(chars.get(i), Some('\'') | Some('"'));
                if is_prefix {
                    i = skip_string(&chars, i)?;
                    toks.push(Tok::Str);
                } else {
                    toks.push(Tok::Name(word));
                }
            }
            c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                while i < chars.len()
                    && (chars[i].is_alphanumeric() || chars[i] == '.' || chars[i] == '_')
                {
                    // exponent sign
                    if (chars[i] == 'e' || chars[i] == 'E')
                        && matches!(chars.get(i + 1), Some('+') | Some('-'))
                    {
                        i += 1;
                    }
                    i += 1;
                }
                toks.push(Tok::Num);
            }
            _ => {
                match c {
                    '(' | '[' | '{' => depth += 1,
                    ')' | ']' | '}' => depth = depth.saturating_sub(1),
                    _ => {}
                }
                toks.push(Tok::Op(c));
                i += 1;
            }
        }
    }
    flush(&mut toks, &mut lines, indent);
    Ok(lines)
}

/// Returns the index just past the string literal starting at `i`.
fn skip_string(chars: &[char], mut i: usize) -> Result<usize, String> {
    let q = chars[i];
    let triple = chars.get(i + 1) == Some(&q) && chars.get(i + 2) == Some(&q);
    i += if triple { 3 } else { 1 };
    while i < chars.len() {
        let c = chars[i];
        if c == '\\' {
            i += 2;
            continue;
        }
        if triple {
            if c == q && chars.get(i + 1) == Some(&q) && chars.get(i + 2) == Some(&q) {
                return Ok(i + 3);
            }
        } else if c == q {
            return Ok(i + 1);
        } else if c == '\n' {
            return Err("unterminated string literal".to_string());
        }
        i += 1;
    }
    Err("unterminated string literal".to_string())
}

fn starts_def(toks: &[Tok]) -> bool {
    match toks.first() {
        Some(t) if t.is_name("def") || t.is_name("class") => true,
        Some(t) if t.is_name("async") => toks.get(1).is_some_and(|t| t.is_name("def")),
        Some(Tok::Op('@')) => true,
        _ => false,
    }
}

/// Splits at depth-0 occurrences of `sep`.
fn split_top(toks: &[Tok], sep: char) -> Vec<&[Tok]> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        match t {
            Tok::Op('(') | Tok::Op('[') | Tok::Op('{') => depth += 1,
            Tok::Op(')') | Tok::Op(']') | Tok::Op('}') => depth -= 1,
            Tok::Op(c) if *c == sep && depth == 0 => {
                out.push(&toks[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&toks[start..]);
    out
}

fn top_colon(toks: &[Tok]) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in toks.iter().enumerate() {
        match t {
            Tok::Op('(') | Tok::Op('[') | Tok::Op('{') => depth += 1,
            Tok::Op(')') | Tok::Op(']') | Tok::Op('}') => depth -= 1,
            Tok::Op(':') if depth == 0 => return Some(i),
            _ if t.is_name("lambda") && depth == 0 => return None,
            _ => {}
        }
    }
    None
}

const COMPOUND: [&str; 9] = [
    "if", "elif", "else", "for", "while", "with", "try", "except", "finally",
];

/// Collects the return expressions of one simple or compound statement.
fn collect_returns<'a>(stmt: &'a [Tok], out: &mut Vec<&'a [Tok]>) {
    for part in split_top(stmt, ';') {
        let Some(first) = part.first() else { continue };
        if first.is_name("return") {
            out.push(&part[1..]);
        } else if COMPOUND.iter().any(|k| first.is_name(k)) {
            if let Some(c) = top_colon(part) {
                collect_returns(&part[c + 1..], out);
            }
        }
    }
}

fn analyze(source: &str) -> Result<bool, String> {
    let lines = tokenize(source)?;
    let def_at = lines
        .iter()
        .position(|l| {
            let t = &l.toks;
            let skip = usize::from(t.first().is_some_and(|t| t.is_name("async")));
            t.get(skip).is_some_and(|t| t.is_name("def"))
                && t.get(skip + 1).is_some_and(|t| t.is_name("resample_history"))
        })
        .ok_or("no resample_history definition found")?;
    let header = &lines[def_at];
    let param = header
        .toks
        .iter()
        .skip_while(|t| !t.is_op('('))
        .skip(1)
        .find_map(|t| match t {
            Tok::Name(n) => Some(n.clone()),
            _ => None,
        });

    let mut returns: Vec<&[Tok]> = Vec::new();
    // a body on the header line itself
    let colon = header
        .toks
        .iter()
        .rposition(|t| t.is_op(':'))
        .ok_or("malformed resample_history header")?;
    let close = header.toks.iter().rposition(|t| t.is_op(')')).unwrap_or(0);
    if colon > close && colon + 1 < header.toks.len() {
        collect_returns(&header.toks[colon + 1..], &mut returns);
    }

    let mut skip_deeper_than: Option<usize> = None;
    for line in &lines[def_at + 1..] {
        if line.indent <= header.indent {
            break;
        }
        if let Some(d) = skip_deeper_than {
            if line.indent > d {
                continue;
            }
            skip_deeper_than = None;
        }
        if starts_def(&line.toks) {
            skip_deeper_than = Some(line.indent);
            continue;
        }
        collect_returns(&line.toks, &mut returns);
    }

    Ok(!returns.is_empty() && returns.iter().all(|e| trivial_return(e, param.as_deref())))
}

fn trivial_return(expr: &[Tok], param: Option<&str>) -> bool {
    if expr.is_empty() || (expr.len() == 1 && expr[0].is_name("None")) {
        return true;
    }
    if expr.len() == 3 && expr[0].is_name("list") && expr[1].is_op('(') && expr[2].is_op(')') {
        return true;
    }
    if expr.len() >= 2 && expr[0].is_op('[') && expr[expr.len() - 1].is_op(']') && encloses(expr) {
        let inner = &expr[1..expr.len() - 1];
        return constant_items(inner) || param.is_some_and(|p| echo_comprehension(inner, p));
    }
    false
}

/// True when the opening bracket at 0 closes at the last token.
fn encloses(expr: &[Tok]) -> bool {
    let mut depth = 0i32;
    for (i, t) in expr.iter().enumerate() {
        match t {
            Tok::Op('(') | Tok::Op('[') | Tok::Op('{') => depth += 1,
            Tok::Op(')') | Tok::Op(']') | Tok::Op('}') => {
                depth -= 1;
                if depth == 0 && i + 1 != expr.len() {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}

fn constant_items(inner: &[Tok]) -> bool {
    split_top(inner, ',')
        .into_iter()
        .enumerate()
        .all(|(i, item)| (item.is_empty() && i > 0) || inner.is_empty() || constant(item))
}

fn constant(item: &[Tok]) -> bool {
    match item {
        [Tok::Str] | [Tok::Num] => true,
        [Tok::Op('-'), Tok::Num] | [Tok::Op('+'), Tok::Num] => true,
        [Tok::Name(n)] => matches!(n.as_str(), "None" | "True" | "False"),
        _ if item.iter().all(|t| matches!(t, Tok::Str)) => !item.is_empty(),
        _ if item.len() >= 2
            && ((item[0].is_op('[') && item[item.len() - 1].is_op(']'))
                || (item[0].is_op('(') && item[item.len() - 1].is_op(')')))
            && encloses(item) =>
        {
            constant_items(&item[1..item.len() - 1])
        }
        _ => false,
    }
}

/// `X for T in P [if ...]` with X a loop target or a loop target indexed
/// by an integer.
fn echo_comprehension(inner: &[Tok], param: &str) -> bool {
    let Some(f) = inner.iter().position(|t| t.is_name("for")) else {
        return false;
    };
    let Some(n) = inner.iter().position(|t| t.is_name("in")) else {
        return false;
    };
    if n < f {
        return false;
    }
    let targets: Vec<&str> = inner[f + 1..n]
        .iter()
        .filter_map(|t| match t {
            Tok::Name(s) => Some(s.as_str()),
            Tok::Op(',') | Tok::Op('(') | Tok::Op(')') => None,
            _ => Some(""),
        })
        .collect();
    if targets.is_empty() || targets.contains(&"") {
        return false;
    }
    let source_ok = inner.get(n + 1).is_some_and(|t| t.is_name(param))
        && (inner.len() == n + 2 || inner[n + 2].is_name("if"));
    let element_ok = match &inner[..f] {
        [Tok::Name(x)] => targets.contains(&x.as_str()),
        [Tok::Name(x), Tok::Op('['), idx @ .., Tok::Op(']')] => {
            targets.contains(&x.as_str())
                && matches!(idx, [Tok::Num] | [Tok::Op('-'), Tok::Num])
        }
        _ => false,
    };
    source_ok && element_ok
}
