//! The machine report format: a self-describing key/value tree.
//!
//! ```text
//! command = "reproduce ex2"
//! inputs_digest = "9f8a…"
//! results {
//!   q = 2.0000000000000000e0
//!   pass = true
//!   f_values [
//!     8.0000000000000000e0
//!     4.0000000000000000e0
//!   ]
//! }
//! ```
//!
//! Scalars are strings ("…", with \" and \\ escapes), booleans, integers
//! (bare digits), and reals (always in scientific notation with 17
//! significant digits). `key [` opens a list, `key {` opens a map; a
//! bare `{` or `[` opens an unnamed element inside a list. Re-serializing
//! a parsed document reproduces it byte for byte. Wall time is reported
//! only in text output so machine reports stay identical across runs.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Str(String),
    Num(f64),
    Int(i64),
    Bool(bool),
    List(Vec<Node>),
    Map(Vec<(String, Node)>),
}

impl Node {
    pub fn map() -> Node {
        Node::Map(Vec::new())
    }

    pub fn push(&mut self, key: &str, value: Node) -> &mut Node {
        match self {
            Node::Map(entries) => entries.push((key.to_string(), value)),
            _ => panic!("push on a non-map node"),
        }
        self
    }

    pub fn num_list(values: &[f64]) -> Node {
        Node::List(values.iter().map(|&v| Node::Num(v)).collect())
    }

    /// Serializes the document. The root must be a map; its entries are
    /// rendered at indent zero.
    pub fn to_machine(&self) -> String {
        let mut out = String::new();
        match self {
            Node::Map(entries) => {
                for (key, value) in entries {
                    write_entry(&mut out, 0, key, value);
                }
            }
            _ => panic!("machine documents have a map at the root"),
        }
        out
    }

    pub fn parse_machine(text: &str) -> Result<Node, String> {
        let mut lines = text.lines().enumerate().peekable();
        let entries = parse_map_body(&mut lines, 0, false)?;
        if let Some((idx, line)) = lines.next() {
            return Err(format!("line {}: unexpected `{}`", idx + 1, line.trim()));
        }
        Ok(Node::Map(entries))
    }
}

pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_scalar(out: &mut String, node: &Node) {
    match node {
        Node::Str(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    _ => out.push(c),
                }
            }
            out.push('"');
        }
        Node::Num(x) => {
            let _ = write!(out, "{}", format_real(*x));
        }
        Node::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Node::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        _ => unreachable!("containers are not scalars"),
    }
}

fn write_entry(out: &mut String, depth: usize, key: &str, value: &Node) {
    match value {
        Node::Map(entries) => {
            indent(out, depth);
            let _ = writeln!(out, "{key} {{");
            for (k, v) in entries {
                write_entry(out, depth + 1, k, v);
            }
            indent(out, depth);
            out.push_str("}\n");
        }
        Node::List(items) => {
            indent(out, depth);
            let _ = writeln!(out, "{key} [");
            for item in items {
                write_list_item(out, depth + 1, item);
            }
            indent(out, depth);
            out.push_str("]\n");
        }
        scalar => {
            indent(out, depth);
            let _ = write!(out, "{key} = ");
            write_scalar(out, scalar);
            out.push('\n');
        }
    }
}

fn write_list_item(out: &mut String, depth: usize, item: &Node) {
    match item {
        Node::Map(entries) => {
            indent(out, depth);
            out.push_str("{\n");
            for (k, v) in entries {
                write_entry(out, depth + 1, k, v);
            }
            indent(out, depth);
            out.push_str("}\n");
        }
        Node::List(items) => {
            indent(out, depth);
            out.push_str("[\n");
            for sub in items {
                write_list_item(out, depth + 1, sub);
            }
            indent(out, depth);
            out.push_str("]\n");
        }
        scalar => {
            indent(out, depth);
            write_scalar(out, scalar);
            out.push('\n');
        }
    }
}

type Lines<'a> = std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>;

fn parse_scalar(idx: usize, text: &str) -> Result<Node, String> {
    let t = text.trim();
    if t.starts_with('"') {
        if !t.ends_with('"') || t.len() < 2 {
            return Err(format!("line {}: unterminated string", idx + 1));
        }
        let inner = &t[1..t.len() - 1];
        let mut s = String::new();
        let mut chars = inner.chars();
        while let Some(c) = chars.next() {
            if c == '\\' {
                match chars.next() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    _ => return Err(format!("line {}: bad escape", idx + 1)),
                }
            } else {
                s.push(c);
            }
        }
        return Ok(Node::Str(s));
    }
    if t == "true" {
        return Ok(Node::Bool(true));
    }
    if t == "false" {
        return Ok(Node::Bool(false));
    }
    if t.contains('e') || t.contains('.') {
        return t
            .parse::<f64>()
            .map(Node::Num)
            .map_err(|_| format!("line {}: bad real `{t}`", idx + 1));
    }
    t.parse::<i64>()
        .map(Node::Int)
        .map_err(|_| format!("line {}: bad integer `{t}`", idx + 1))
}

fn parse_map_body(
    lines: &mut Lines,
    _depth: usize,
    braced: bool,
) -> Result<Vec<(String, Node)>, String> {
    let mut entries = Vec::new();
    loop {
        let (idx, raw) = match lines.peek() {
            Some(&(idx, raw)) => (idx, raw),
            None => {
                if braced {
                    return Err("unexpected end of document inside a map".into());
                }
                return Ok(entries);
            }
        };
        let line = raw.trim();
        if line.is_empty() {
            lines.next();
            continue;
        }
        if line == "}" {
            if !braced {
                return Err(format!("line {}: stray `}}`", idx + 1));
            }
            lines.next();
            return Ok(entries);
        }
        lines.next();
        if let Some(key) = line.strip_suffix('{') {
            let key = key.trim();
            let inner = parse_map_body(lines, 0, true)?;
            entries.push((key.to_string(), Node::Map(inner)));
        } else if let Some(key) = line.strip_suffix('[') {
            let key = key.trim();
            let inner = parse_list_body(lines)?;
            entries.push((key.to_string(), Node::List(inner)));
        } else if let Some((key, value)) = line.split_once('=') {
            entries.push((key.trim().to_string(), parse_scalar(idx, value)?));
        } else {
            return Err(format!(
                "line {}: expected `key = value`, `key {{` or `key [`",
                idx + 1
            ));
        }
    }
}

fn parse_list_body(lines: &mut Lines) -> Result<Vec<Node>, String> {
    let mut items = Vec::new();
    loop {
        let (idx, raw) = match lines.next() {
            Some(pair) => pair,
            None => return Err("unexpected end of document inside a list".into()),
        };
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "]" {
            return Ok(items);
        }
        if line == "{" {
            items.push(Node::Map(parse_map_body(lines, 0, true)?));
        } else if line == "[" {
            items.push(Node::List(parse_list_body(lines)?));
        } else {
            items.push(parse_scalar(idx, line)?);
        }
    }
}
