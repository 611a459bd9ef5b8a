//! The line-oriented problem file format.
//!
//! ```text
//! # comment
//! timescale:
//!   kind = explicit            # explicit | uniform | qscale
//!   points = -1, -0.5, 0       # explicit
//!   # a = -1   b = 0   n = 1000   (uniform: n intervals)
//!   # q = 2    a = 1   b = 8      (qscale)
//! interval:
//!   a = -1
//!   b = 0
//! boundary:
//!   left = 1                   # a number fixes the value; `free` frees it
//!   right = 0
//! functional:
//!   H = "z1*z2"
//!   integrand = "v^2"          # repeated, in order: z1, z2, ...
//!   integrand = "t*v"
//! initial:                     # optional
//!   expr = "-t"                # or: values = 1, 0.5, 0
//! ```
//!
//! Diagnostics carry line numbers.

use std::path::Path;
use std::sync::Arc;

use tsvar::calculus::GridFunction;
use tsvar::timescale::TimeScale;
use tsvar::variational::{BoundaryCondition, CompositeFunctional, Integrand, VariationalProblem};

use crate::CliError;

#[derive(Debug, Clone)]
pub enum InitialGuess {
    Expr(String),
    Values(Vec<f64>),
}

#[derive(Debug)]
pub struct ProblemFile {
    pub scale: Arc<TimeScale>,
    pub h_text: String,
    pub integrand_texts: Vec<String>,
    pub initial: Option<InitialGuess>,
    pub problem: VariationalProblem,
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

fn usage(line: usize, message: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("line {line}: {message}"))
}

fn split_sections(text: &str) -> Result<Vec<Section>, CliError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(name) = trimmed.strip_suffix(':') {
            if name.contains('=') {
                return Err(usage(line_no, "malformed section header"));
            }
            sections.push(Section {
                name: name.trim().to_string(),
                line: line_no,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| usage(line_no, "expected `key = value` or a `section:` header"))?;
        let section = sections
            .last_mut()
            .ok_or_else(|| usage(line_no, "`key = value` before any section header"))?;
        section.entries.push(Entry {
            line: line_no,
            key: key.trim().to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(sections)
}

fn parse_number(e: &Entry) -> Result<f64, CliError> {
    e.value
        .parse::<f64>()
        .map_err(|_| usage(e.line, format!("`{}` is not a number", e.value)))
}

fn parse_number_list(e: &Entry) -> Result<Vec<f64>, CliError> {
    e.value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage(e.line, format!("`{}` is not a number", s.trim())))
        })
        .collect()
}

fn unquote(e: &Entry) -> Result<String, CliError> {
    let v = e.value.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        Ok(v[1..v.len() - 1].to_string())
    } else {
        Err(usage(e.line, "expected a double-quoted expression"))
    }
}

struct SectionView<'a> {
    section: &'a Section,
}

impl<'a> SectionView<'a> {
    fn get(&self, key: &str) -> Option<&'a Entry> {
        self.section.entries.iter().find(|e| e.key == key)
    }

    fn require(&self, key: &str) -> Result<&'a Entry, CliError> {
        self.get(key).ok_or_else(|| {
            usage(
                self.section.line,
                format!("section `{}` is missing `{key}`", self.section.name),
            )
        })
    }
}

pub fn load_problem(path: &Path) -> Result<ProblemFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_problem(&text)
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, CliError> {
    let sections = split_sections(text)?;
    let view = |name: &str| -> Result<SectionView, CliError> {
        sections
            .iter()
            .find(|s| s.name == name)
            .map(|section| SectionView { section })
            .ok_or_else(|| CliError::Usage(format!("missing `{name}:` section")))
    };

    // timescale
    let ts_section = view("timescale")?;
    let kind = ts_section.require("kind")?;
    let scale = match kind.value.as_str() {
        "explicit" => {
            let points_entry = ts_section.require("points")?;
            let points = parse_number_list(points_entry)?;
            TimeScale::explicit(&points).map_err(|e| usage(points_entry.line, e))?
        }
        "uniform" => {
            let a = parse_number(ts_section.require("a")?)?;
            let b = parse_number(ts_section.require("b")?)?;
            let n_entry = ts_section.require("n")?;
            let n = n_entry
                .value
                .parse::<usize>()
                .map_err(|_| usage(n_entry.line, "`n` must be a positive integer"))?;
            TimeScale::uniform(a, b, n).map_err(|e| usage(n_entry.line, e))?
        }
        "qscale" => {
            let q_entry = ts_section.require("q")?;
            let q = parse_number(q_entry)?;
            let a = parse_number(ts_section.require("a")?)?;
            let b = parse_number(ts_section.require("b")?)?;
            TimeScale::q_scale(q, a, b).map_err(|e| usage(q_entry.line, e))?
        }
        other => {
            return Err(usage(
                kind.line,
                format!("unknown time scale kind `{other}` (explicit | uniform | qscale)"),
            ))
        }
    };
    let scale = Arc::new(scale);

    // interval
    let interval = view("interval")?;
    let a_entry = interval.require("a")?;
    let b_entry = interval.require("b")?;
    let a = parse_number(a_entry)?;
    let b = parse_number(b_entry)?;
    scale
        .locate(a)
        .map_err(|_| usage(a_entry.line, format!("{a} not a scale point")))?;
    scale
        .locate(b)
        .map_err(|_| usage(b_entry.line, format!("{b} not a scale point")))?;

    // boundary
    let boundary = view("boundary")?;
    let parse_bc = |key: &str| -> Result<BoundaryCondition, CliError> {
        let e = boundary.require(key)?;
        if e.value == "free" {
            Ok(BoundaryCondition::Free)
        } else {
            Ok(BoundaryCondition::Fixed(parse_number(e)?))
        }
    };
    let left = parse_bc("left")?;
    let right = parse_bc("right")?;

    // functional
    let functional_section = view("functional")?;
    let h_entry = functional_section.require("H")?;
    let h_text = unquote(h_entry)?;
    let integrand_entries: Vec<&Entry> = functional_section
        .section
        .entries
        .iter()
        .filter(|e| e.key == "integrand")
        .collect();
    if integrand_entries.is_empty() {
        return Err(usage(
            functional_section.section.line,
            "at least one `integrand = \"...\"` line is required",
        ));
    }
    let mut integrand_texts = Vec::new();
    for e in &integrand_entries {
        integrand_texts.push(unquote(e)?);
    }
    let z_names: Vec<String> = (1..=integrand_texts.len())
        .map(|i| format!("z{i}"))
        .collect();
    let z_refs: Vec<&str> = z_names.iter().map(|s| s.as_str()).collect();
    let h = tsvar::expr::parse(&h_text, &z_refs).map_err(|e| usage(h_entry.line, e))?;
    let mut integrands = Vec::new();
    for (entry, text) in integrand_entries.iter().zip(&integrand_texts) {
        let f = tsvar::expr::parse(text, &tsvar::variational::INTEGRAND_VARS)
            .map_err(|e| usage(entry.line, e))?;
        // kinked integrands get finite-difference partials so residuals
        // stay defined across the kink
        let integrand = if f.contains_abs() {
            Integrand::with_numeric_partials(f, 1e-6)
        } else {
            Integrand::new(f)
        }
        .map_err(|e| usage(entry.line, e))?;
        integrands.push(integrand);
    }
    let functional = CompositeFunctional::new(h, integrands).map_err(|e| usage(h_entry.line, e))?;

    // initial (optional)
    let initial = match sections.iter().find(|s| s.name == "initial") {
        None => None,
        Some(section) => {
            let v = SectionView { section };
            if let Some(e) = v.get("expr") {
                Some(InitialGuess::Expr(unquote(e)?))
            } else if let Some(e) = v.get("values") {
                let values = parse_number_list(e)?;
                if values.len() != scale.len() {
                    return Err(usage(
                        e.line,
                        format!(
                            "{} initial values for a scale of {} points",
                            values.len(),
                            scale.len()
                        ),
                    ));
                }
                Some(InitialGuess::Values(values))
            } else {
                return Err(usage(
                    section.line,
                    "`initial:` needs `expr = \"...\"` or `values = ...`",
                ));
            }
        }
    };

    let problem = VariationalProblem::new(Arc::clone(&scale), a, b, functional, left, right)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    Ok(ProblemFile {
        scale,
        h_text,
        integrand_texts,
        initial,
        problem,
    })
}

/// Samples a closed-form candidate expression in `t` onto the scale.
pub fn candidate_from_expr(scale: &Arc<TimeScale>, text: &str) -> Result<GridFunction, CliError> {
    let expr = tsvar::expr::parse(text, &["t"])
        .map_err(|e| CliError::Usage(format!("candidate expression: {e}")))?;
    let mut values = Vec::with_capacity(scale.len());
    for &t in scale.points() {
        values.push(
            expr.eval(&[("t", t)])
                .map_err(|e| CliError::Domain(e.to_string()))?,
        );
    }
    GridFunction::from_values(Arc::clone(scale), values)
        .map_err(|e| CliError::Domain(e.to_string()))
}

/// Builds a candidate from an explicit value list.
pub fn candidate_from_values(scale: &Arc<TimeScale>, list: &str) -> Result<GridFunction, CliError> {
    let values: Vec<f64> = list
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("`{}` is not a number", s.trim())))
        })
        .collect::<Result<_, _>>()?;
    if values.len() != scale.len() {
        return Err(CliError::Usage(format!(
            "{} candidate values for a scale of {} points",
            values.len(),
            scale.len()
        )));
    }
    GridFunction::from_values(Arc::clone(scale), values)
        .map_err(|e| CliError::Domain(e.to_string()))
}

pub fn initial_guess(pf: &ProblemFile) -> Result<Option<GridFunction>, CliError> {
    match &pf.initial {
        None => Ok(None),
        Some(InitialGuess::Expr(text)) => Ok(Some(candidate_from_expr(&pf.scale, text)?)),
        Some(InitialGuess::Values(values)) => Ok(Some(
            GridFunction::from_values(Arc::clone(&pf.scale), values.clone())
                .map_err(|e| CliError::Domain(e.to_string()))?,
        )),
    }
}
