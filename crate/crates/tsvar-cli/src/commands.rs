//! Implementations of the subcommands. Text reports follow the order
//! component values, then Euler-Lagrange residuals, then boundary terms.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use sha2::{Digest, Sha256};

use tsvar::calculus::GridFunction;
use tsvar::duality::{dual_lagrangian, dual_timescale, run_random_suite};
use tsvar::expr::parse as parse_expr;
use tsvar::solver::{
    self, direct_minimize_from, solve_q_system, stationary_scan_1d, SolveOptions, SolveResult,
    SolveStatus,
};
use tsvar::timescale::TimeScale;
use tsvar::variational::{
    el_residual, eval_components, eval_functional, BoundaryCondition, ELReport, VariationalProblem,
};

use crate::problem::{
    candidate_from_expr, candidate_from_values, initial_guess, load_problem, ProblemFile,
};
use crate::report::{format_real, Node};
use crate::{CliError, OutputMode};

type CliResult = Result<(), CliError>;

fn digest_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn digest_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(digest_bytes(&bytes))
}

fn parse_range(text: &str) -> Result<(f64, f64), CliError> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("range `{text}` is not LO:HI")))?;
    let lo = lo
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::Usage(format!("range bound `{lo}` is not a number")))?;
    let hi = hi
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::Usage(format!("range bound `{hi}` is not a number")))?;
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN bounds
    if !(lo < hi) {
        return Err(CliError::Usage(format!("range `{text}` needs LO < HI")));
    }
    Ok((lo, hi))
}

fn emit(output: OutputMode, doc: &Node, text: &str, started: Instant) {
    match output {
        OutputMode::Machine => print!("{}", doc.to_machine()),
        OutputMode::Text => {
            print!("{text}");
            println!("wall time: {:?}", started.elapsed());
        }
    }
}

fn candidate(
    pf: &ProblemFile,
    x: Option<&str>,
    x_values: Option<&str>,
) -> Result<GridFunction, CliError> {
    match (x, x_values) {
        (Some(expr), _) => candidate_from_expr(&pf.scale, expr),
        (None, Some(list)) => candidate_from_values(&pf.scale, list),
        (None, None) => initial_guess(pf)?.ok_or_else(|| {
            CliError::Usage(
                "no candidate: pass --x or --x-values, or add an `initial:` section".into(),
            )
        }),
    }
}

fn bc_node(bc: BoundaryCondition) -> Node {
    match bc {
        BoundaryCondition::Fixed(v) => Node::Num(v),
        BoundaryCondition::Free => Node::Str("free".into()),
    }
}

fn problem_node(pf: &ProblemFile, digest: &str) -> Node {
    let p = &pf.problem;
    let mut node = Node::map();
    node.push("digest", Node::Str(digest.into()));
    node.push("points", Node::Int(pf.scale.len() as i64));
    node.push("a", Node::Num(p.a()));
    node.push("b", Node::Num(p.b()));
    node.push("left", bc_node(p.left_bc()));
    node.push("right", bc_node(p.right_bc()));
    node.push("H", Node::Str(pf.h_text.clone()));
    node.push(
        "integrands",
        Node::List(
            pf.integrand_texts
                .iter()
                .map(|t| Node::Str(t.clone()))
                .collect(),
        ),
    );
    node
}

fn f_values_text(out: &mut String, f_values: &[f64]) {
    for (i, f) in f_values.iter().enumerate() {
        let _ = writeln!(out, "  F{} = {}", i + 1, format_real(*f));
    }
}

fn report_node(report: &ELReport) -> Node {
    let mut node = Node::map();
    node.push("f_values", Node::num_list(&report.f_values));
    node.push("h_grad", Node::num_list(&report.h_grad));
    node.push("points", Node::num_list(&report.points));
    node.push("residuals", Node::num_list(&report.residuals));
    if let Some(r) = report.left_bc_residual {
        node.push("left_bc_residual", Node::Num(r));
    }
    if let Some(r) = report.right_bc_residual {
        node.push("right_bc_residual", Node::Num(r));
    }
    node.push("max_abs_residual", Node::Num(report.max_abs_residual()));
    node
}

fn report_text(out: &mut String, report: &ELReport) {
    let _ = writeln!(out, "component values:");
    f_values_text(out, &report.f_values);
    let _ = writeln!(out, "outer gradient H':");
    for (i, g) in report.h_grad.iter().enumerate() {
        let _ = writeln!(out, "  H'{} = {}", i + 1, format_real(*g));
    }
    let _ = writeln!(out, "Euler-Lagrange residuals:");
    let shown = report.points.len().min(16);
    for (t, r) in report.points[..shown]
        .iter()
        .zip(&report.residuals[..shown])
    {
        let _ = writeln!(out, "  t = {t:<22} residual = {}", format_real(*r));
    }
    if report.points.len() > shown {
        let _ = writeln!(
            out,
            "  … ({} more; see machine output)",
            report.points.len() - shown
        );
    }
    if report.points.is_empty() {
        let _ = writeln!(out, "  (assertion set is empty on this interval)");
    }
    let _ = writeln!(out, "boundary terms:");
    match report.left_bc_residual {
        Some(r) => {
            let _ = writeln!(out, "  left  (free): residual = {}", format_real(r));
        }
        None => {
            let _ = writeln!(out, "  left  (fixed): no natural condition");
        }
    }
    match report.right_bc_residual {
        Some(r) => {
            let _ = writeln!(out, "  right (free): residual = {}", format_real(r));
        }
        None => {
            let _ = writeln!(out, "  right (fixed): no natural condition");
        }
    }
    let _ = writeln!(
        out,
        "max |residual| = {}",
        format_real(report.max_abs_residual())
    );
}

pub fn eval(path: &Path, x: Option<&str>, x_values: Option<&str>, output: OutputMode) -> CliResult {
    let started = Instant::now();
    let digest = digest_file(path)?;
    let pf = load_problem(path)?;
    let cand = candidate(&pf, x, x_values)?;
    let f_values = eval_components(&pf.problem, &cand)?;
    let value = eval_functional(&pf.problem, &cand)?;

    let mut doc = Node::map();
    doc.push("command", Node::Str("eval".into()));
    doc.push("problem", problem_node(&pf, &digest));
    let mut results = Node::map();
    results.push("f_values", Node::num_list(&f_values));
    results.push("functional", Node::Num(value));
    doc.push("results", results);

    let mut text = String::new();
    let _ = writeln!(text, "eval {}", path.display());
    let _ = writeln!(text, "component values:");
    f_values_text(&mut text, &f_values);
    let _ = writeln!(text, "H(F) = {}", format_real(value));
    emit(output, &doc, &text, started);
    Ok(())
}

pub fn residual(
    path: &Path,
    x: Option<&str>,
    x_values: Option<&str>,
    verify_tol: Option<f64>,
    output: OutputMode,
) -> CliResult {
    let started = Instant::now();
    let digest = digest_file(path)?;
    let pf = load_problem(path)?;
    let cand = candidate(&pf, x, x_values)?;
    let report = el_residual(&pf.problem, &cand)?;

    let mut doc = Node::map();
    doc.push("command", Node::Str("residual".into()));
    doc.push("problem", problem_node(&pf, &digest));
    doc.push("results", report_node(&report));

    let mut text = String::new();
    let _ = writeln!(text, "residual {}", path.display());
    report_text(&mut text, &report);

    if let Some(tol) = verify_tol {
        let pass = report.max_abs_residual() <= tol;
        doc.push("verify_tol", Node::Num(tol));
        doc.push("pass", Node::Bool(pass));
        let _ = writeln!(
            text,
            "verification at tolerance {}: {}",
            format_real(tol),
            if pass { "PASS" } else { "FAIL" }
        );
        emit(output, &doc, &text, started);
        if !pass {
            return Err(CliError::Verification(format!(
                "max residual {} exceeds {}",
                format_real(report.max_abs_residual()),
                format_real(tol)
            )));
        }
        return Ok(());
    }
    emit(output, &doc, &text, started);
    Ok(())
}

fn solve_result_node(result: &SolveResult) -> Node {
    let mut node = Node::map();
    node.push("status", Node::Str(result.status.to_string()));
    node.push("iterations", Node::Int(result.iterations as i64));
    node.push("message", Node::Str(result.message.clone()));
    node.push("f_values", Node::num_list(&result.f_values));
    if let Some(sol) = &result.solution {
        node.push("solution", Node::num_list(sol.values()));
    }
    if let Some(report) = &result.report {
        node.push("report", report_node(report));
    }
    if let Some(inertia) = result.hessian_inertia {
        let mut i = Node::map();
        i.push("positive", Node::Int(inertia.positive as i64));
        i.push("negative", Node::Int(inertia.negative as i64));
        i.push("near_zero", Node::Int(inertia.near_zero as i64));
        node.push("hessian_inertia", i);
    }
    node
}

fn solve_result_text(out: &mut String, result: &SolveResult) {
    let _ = writeln!(
        out,
        "status: {} after {} iterations ({})",
        result.status, result.iterations, result.message
    );
    if let Some(report) = &result.report {
        report_text(out, report);
    }
    if let Some(sol) = &result.solution {
        let values = sol.values();
        let _ = writeln!(out, "solution ({} values):", values.len());
        let shown = values.len().min(12);
        for (t, v) in sol.scale().points()[..shown].iter().zip(&values[..shown]) {
            let _ = writeln!(out, "  x({t}) = {}", format_real(*v));
        }
        if values.len() > shown {
            let _ = writeln!(
                out,
                "  … ({} more; see machine output)",
                values.len() - shown
            );
        }
    }
    if let Some(inertia) = result.hessian_inertia {
        let _ = writeln!(out, "hessian inertia at solution: {inertia}");
    }
}

pub fn solve(path: &Path, tol: f64, max_iter: usize, seed: u64, output: OutputMode) -> CliResult {
    let started = Instant::now();
    let digest = digest_file(path)?;
    let pf = load_problem(path)?;
    let opts = SolveOptions {
        tolerance: tol,
        max_iterations: max_iter,
        seed,
        ..SolveOptions::default()
    };
    let init = match initial_guess(&pf)? {
        Some(x) => x,
        None => solver::default_init(&pf.problem),
    };
    let result = direct_minimize_from(&pf.problem, &init, &opts)?;

    let mut doc = Node::map();
    doc.push("command", Node::Str("solve".into()));
    doc.push("problem", problem_node(&pf, &digest));
    doc.push("results", solve_result_node(&result));

    let mut text = String::new();
    let _ = writeln!(text, "solve {}", path.display());
    solve_result_text(&mut text, &result);
    emit(output, &doc, &text, started);

    match result.status {
        SolveStatus::Converged => Ok(()),
        SolveStatus::DomainError => Err(CliError::Domain(result.message)),
        _ => Err(CliError::Verification(format!(
            "solve did not converge: {} ({})",
            result.status, result.message
        ))),
    }
}

pub fn scan1d(
    path: &Path,
    free_point: f64,
    range: &str,
    samples: usize,
    tol: f64,
    output: OutputMode,
) -> CliResult {
    let started = Instant::now();
    let digest = digest_file(path)?;
    let pf = load_problem(path)?;
    let range = parse_range(range)?;
    let opts = SolveOptions {
        tolerance: tol,
        ..SolveOptions::default()
    };
    let scan = stationary_scan_1d(&pf.problem, free_point, range, samples, &opts)?;

    let mut doc = Node::map();
    doc.push("command", Node::Str("scan1d".into()));
    doc.push("problem", problem_node(&pf, &digest));
    let mut results = Node::map();
    results.push("status", Node::Str(scan.status().to_string()));
    results.push("samples", Node::Int(scan.samples as i64));
    results.push("derivative_floor", Node::Num(scan.derivative_floor));
    results.push("floor_location", Node::Num(scan.floor_location));
    results.push(
        "excluded",
        Node::List(
            scan.excluded
                .iter()
                .map(|&(lo, hi)| Node::num_list(&[lo, hi]))
                .collect(),
        ),
    );
    results.push(
        "roots",
        Node::List(
            scan.roots
                .iter()
                .map(|r| {
                    let mut node = Node::map();
                    node.push("location", Node::Num(r.location));
                    node.push("bracket", Node::num_list(&[r.bracket.0, r.bracket.1]));
                    node.push("solve", solve_result_node(&r.result));
                    node
                })
                .collect(),
        ),
    );
    doc.push("results", results);

    let mut text = String::new();
    let _ = writeln!(
        text,
        "scan1d {} over [{}, {}]",
        path.display(),
        range.0,
        range.1
    );
    let _ = writeln!(text, "status: {}", scan.status());
    let _ = writeln!(
        text,
        "|dL/dm| floor over {} samples: {} at m = {}",
        scan.samples,
        format_real(scan.derivative_floor),
        scan.floor_location
    );
    for (lo, hi) in &scan.excluded {
        let _ = writeln!(text, "excluded (functional undefined): [{lo}, {hi}]");
    }
    if scan.roots.is_empty() {
        let _ = writeln!(text, "no stationary point in the range");
    }
    for root in &scan.roots {
        let _ = writeln!(
            text,
            "root m = {} (bracketed in [{}, {}]):",
            format_real(root.location),
            root.bracket.0,
            root.bracket.1
        );
        solve_result_text(&mut text, &root.result);
    }
    emit(output, &doc, &text, started);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn solve_q(
    residual_texts: &[String],
    guard_texts: &[String],
    range: &str,
    starts: usize,
    tol: f64,
    max_iter: usize,
    output: OutputMode,
) -> CliResult {
    let started = Instant::now();
    let n = residual_texts.len();
    let q_names: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
    let q_refs: Vec<&str> = q_names.iter().map(|s| s.as_str()).collect();
    let parse_all = |texts: &[String]| -> Result<Vec<tsvar::expr::Expr>, CliError> {
        texts
            .iter()
            .map(|t| parse_expr(t, &q_refs).map_err(|e| CliError::Usage(e.to_string())))
            .collect()
    };
    let residuals = parse_all(residual_texts)?;
    let guards = parse_all(guard_texts)?;
    let start_box = parse_range(range)?;
    let opts = SolveOptions {
        tolerance: tol,
        max_iterations: max_iter,
        starts,
        start_box,
        ..SolveOptions::default()
    };
    let result = solve_q_system(&residuals, &guards, &opts)?;

    let args_digest = digest_bytes(
        format!(
            "residuals={residual_texts:?};guards={guard_texts:?};box={start_box:?};starts={starts};tol={tol}"
        )
        .as_bytes(),
    );
    let mut doc = Node::map();
    doc.push("command", Node::Str("solve-q".into()));
    doc.push("inputs_digest", Node::Str(args_digest));
    let mut results = Node::map();
    results.push(
        "roots",
        Node::List(
            result
                .roots
                .iter()
                .map(|r| {
                    let mut node = Node::map();
                    node.push("values", Node::num_list(&r.values));
                    node.push("residual_norm", Node::Num(r.residual_norm));
                    node.push("iterations", Node::Int(r.iterations as i64));
                    node
                })
                .collect(),
        ),
    );
    results.push(
        "excluded",
        Node::List(
            result
                .excluded
                .iter()
                .map(|e| {
                    let mut node = Node::map();
                    node.push("values", Node::num_list(&e.values));
                    node.push("residual_norm", Node::Num(e.residual_norm));
                    node.push("guard", Node::Str(e.guard.clone()));
                    node
                })
                .collect(),
        ),
    );
    results.push(
        "starts_attempted",
        Node::Int(result.starts_attempted as i64),
    );
    results.push(
        "starts_converged",
        Node::Int(result.starts_converged as i64),
    );
    results.push("scan_floor", Node::Num(result.scan_floor));
    results.push("scan_floor_at", Node::num_list(&result.scan_floor_at));
    results.push("scan_points", Node::Int(result.scan_points as i64));
    results.push(
        "scan_domain_failures",
        Node::Int(result.scan_domain_failures as i64),
    );
    results.push("no_real_solutions", Node::Bool(result.no_real_solutions));
    doc.push("results", results);

    let mut text = String::new();
    let _ = writeln!(
        text,
        "solve-q ({n} equations, box [{}, {}])",
        start_box.0, start_box.1
    );
    for r in &result.roots {
        let vals: Vec<String> = r.values.iter().map(|v| format_real(*v)).collect();
        let _ = writeln!(
            text,
            "root ({}) residual {} in {} iterations",
            vals.join(", "),
            format_real(r.residual_norm),
            r.iterations
        );
    }
    for e in &result.excluded {
        let vals: Vec<String> = e.values.iter().map(|v| format_real(*v)).collect();
        let _ = writeln!(
            text,
            "excluded ({}) — guard `{}` vanishes there",
            vals.join(", "),
            e.guard
        );
    }
    let _ = writeln!(
        text,
        "scan floor: {} at ({}) over {} points ({} undefined)",
        format_real(result.scan_floor),
        result
            .scan_floor_at
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(", "),
        result.scan_points,
        result.scan_domain_failures
    );
    let _ = writeln!(
        text,
        "verdict: {}",
        if result.no_real_solutions {
            "no real solutions"
        } else if result.roots.is_empty() {
            "no admissible roots"
        } else {
            "roots found"
        }
    );
    emit(output, &doc, &text, started);
    Ok(())
}

pub fn dualize(path: &Path, output: OutputMode) -> CliResult {
    let started = Instant::now();
    let digest = digest_file(path)?;
    let pf = load_problem(path)?;
    let p = &pf.problem;
    let dual_scale = dual_timescale(&pf.scale);
    let dual_integrands: Vec<String> = p
        .functional()
        .integrands()
        .iter()
        .map(|l| dual_lagrangian(l).map(|d| d.f().to_string()))
        .collect::<Result<_, _>>()?;

    let mut doc = Node::map();
    doc.push("command", Node::Str("dualize".into()));
    doc.push("problem", problem_node(&pf, &digest));
    let mut results = Node::map();
    results.push("dual_points", Node::num_list(dual_scale.points()));
    results.push("dual_a", Node::Num(-p.b()));
    results.push("dual_b", Node::Num(-p.a()));
    // the endpoint conditions swap sides: x*(−b) inherits x(b), x*(−a)
    // inherits x(a)
    results.push("dual_left", bc_node(p.right_bc()));
    results.push("dual_right", bc_node(p.left_bc()));
    results.push("h", Node::Str(pf.h_text.clone()));
    results.push(
        "dual_integrands",
        Node::List(
            dual_integrands
                .iter()
                .map(|s| Node::Str(s.clone()))
                .collect(),
        ),
    );
    doc.push("results", results);

    let mut text = String::new();
    let _ = writeln!(text, "dualize {}", path.display());
    let _ = writeln!(text, "dual scale points: {:?}", dual_scale.points());
    let _ = writeln!(text, "dual interval: [{}, {}]", -p.b(), -p.a());
    let bc_str = |bc: BoundaryCondition| match bc {
        BoundaryCondition::Fixed(v) => format!("{v}"),
        BoundaryCondition::Free => "free".into(),
    };
    let _ = writeln!(
        text,
        "dual boundary: left = {} (from x(b)), right = {} (from x(a))",
        bc_str(p.right_bc()),
        bc_str(p.left_bc())
    );
    let _ = writeln!(text, "H unchanged: {}", pf.h_text);
    for (i, d) in dual_integrands.iter().enumerate() {
        let _ = writeln!(text, "dual integrand {}: {}", i + 1, d);
    }
    let _ = writeln!(
        text,
        "(the dual problem is a delta-side problem on the dual scale)"
    );
    emit(output, &doc, &text, started);
    Ok(())
}

pub fn check_duality(random: usize, seed: u64, output: OutputMode) -> CliResult {
    let started = Instant::now();
    let suite = run_random_suite(random, seed);
    let pass = suite.pass();

    let args_digest = digest_bytes(format!("random={random};seed={seed}").as_bytes());
    let mut doc = Node::map();
    doc.push("command", Node::Str("check-duality".into()));
    doc.push("inputs_digest", Node::Str(args_digest));
    let mut results = Node::map();
    results.push("cases", Node::Int(suite.cases as i64));
    results.push(
        "involution_failures",
        Node::Int(suite.involution_failures as i64),
    );
    results.push(
        "max_derivative_discrepancy",
        Node::Num(suite.max_derivative_discrepancy),
    );
    results.push(
        "max_integral_discrepancy",
        Node::Num(suite.max_integral_discrepancy),
    );
    results.push(
        "max_lagrangian_relative",
        Node::Num(suite.max_lagrangian_relative),
    );
    results.push(
        "max_el_residual_discrepancy",
        Node::Num(suite.max_el_residual_discrepancy),
    );
    results.push("pass", Node::Bool(pass));
    doc.push("results", results);

    let mut text = String::new();
    let _ = writeln!(
        text,
        "check-duality: {} random triples (seed {seed})",
        suite.cases
    );
    let _ = writeln!(
        text,
        "involution: {} failures (exact bitwise check)",
        suite.involution_failures
    );
    let _ = writeln!(
        text,
        "derivative duality max discrepancy: {} (tolerance 1e-12)",
        format_real(suite.max_derivative_discrepancy)
    );
    let _ = writeln!(
        text,
        "integral duality max discrepancy:   {} (tolerance 1e-12)",
        format_real(suite.max_integral_discrepancy)
    );
    let _ = writeln!(
        text,
        "Lagrangian identity max relative:   {} (tolerance 1e-10)",
        format_real(suite.max_lagrangian_relative)
    );
    let _ = writeln!(
        text,
        "EL residual transfer max:           {} (tolerance 1e-10)",
        format_real(suite.max_el_residual_discrepancy)
    );
    let _ = writeln!(text, "{}", if pass { "PASS" } else { "FAIL" });
    emit(output, &doc, &text, started);
    if pass {
        Ok(())
    } else {
        Err(CliError::Verification("duality suite failed".into()))
    }
}

// ---------------------------------------------------------------------
// worked-example reproductions
// ---------------------------------------------------------------------

struct Check {
    label: String,
    pass: bool,
    detail: String,
}

fn check(label: &str, pass: bool, detail: String) -> Check {
    Check {
        label: label.to_string(),
        pass,
        detail,
    }
}

fn finish_reproduce(
    example: &str,
    checks: Vec<Check>,
    extra: Node,
    output: OutputMode,
    started: Instant,
) -> CliResult {
    let all = checks.iter().all(|c| c.pass);
    let mut doc = Node::map();
    doc.push("command", Node::Str(format!("reproduce {example}")));
    doc.push(
        "inputs_digest",
        Node::Str(digest_bytes(format!("reproduce {example}").as_bytes())),
    );
    doc.push(
        "checks",
        Node::List(
            checks
                .iter()
                .map(|c| {
                    let mut node = Node::map();
                    node.push("label", Node::Str(c.label.clone()));
                    node.push("pass", Node::Bool(c.pass));
                    node.push("detail", Node::Str(c.detail.clone()));
                    node
                })
                .collect(),
        ),
    );
    doc.push("results", extra);
    doc.push("pass", Node::Bool(all));

    let mut text = String::new();
    let _ = writeln!(text, "reproduce {example}");
    for c in &checks {
        let _ = writeln!(
            text,
            "  [{}] {} — {}",
            if c.pass { "ok" } else { "FAIL" },
            c.label,
            c.detail
        );
    }
    let _ = writeln!(text, "{}", if all { "PASS" } else { "FAIL" });
    emit(output, &doc, &text, started);
    if all {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "reproduce {example} failed"
        )))
    }
}

fn ex1_functional() -> tsvar::variational::CompositeFunctional {
    tsvar::variational::CompositeFunctional::parse("z1*z2", &["v^2", "t*v"]).unwrap()
}

fn ex2_functional() -> tsvar::variational::CompositeFunctional {
    tsvar::variational::CompositeFunctional::parse("z1/z2", &["v^2", "v + v^2"]).unwrap()
}

pub fn reproduce(example: &str, output: OutputMode) -> CliResult {
    let started = Instant::now();
    match example {
        "ex2" => reproduce_ex2(output, started),
        "ex1-3pt" => reproduce_ex1_3pt(output, started),
        "ex1-real" => reproduce_ex1_real(output, started),
        other => Err(CliError::Usage(format!(
            "unknown example `{other}` (ex1-real | ex1-3pt | ex2)"
        ))),
    }
}

/// Quotient example: the extremal −2t does not depend on the time scale.
fn reproduce_ex2(output: OutputMode, started: Instant) -> CliResult {
    let ts = Arc::new(TimeScale::explicit(&[-2.0, -1.5, -0.7, 0.0]).unwrap());
    let p = VariationalProblem::new(
        Arc::clone(&ts),
        -2.0,
        0.0,
        ex2_functional(),
        BoundaryCondition::Fixed(4.0),
        BoundaryCondition::Fixed(0.0),
    )
    .unwrap();

    // the closed-form extremal has residual zero on the nose
    let exact = GridFunction::from_fn(Arc::clone(&ts), |t| -2.0 * t).unwrap();
    let exact_report = el_residual(&p, &exact)?;
    let q_exact = exact_report.f_values[0] / exact_report.f_values[1];

    // and the solver recovers it from a perturbed start
    let opts = SolveOptions {
        tolerance: 1e-12,
        ..SolveOptions::default()
    };
    let init = solver::perturbed_init(&p, 0.3, 11);
    let result = direct_minimize_from(&p, &init, &opts)?;
    let solved_q = if result.f_values.len() == 2 && result.f_values[1] != 0.0 {
        result.f_values[0] / result.f_values[1]
    } else {
        f64::NAN
    };
    let sup = result
        .solution
        .as_ref()
        .map(|sol| {
            ts.points()
                .iter()
                .zip(sol.values())
                .map(|(&t, &v)| (v + 2.0 * t).abs())
                .fold(0.0_f64, f64::max)
        })
        .unwrap_or(f64::INFINITY);

    let checks = vec![
        check(
            "x(t) = -2t satisfies the Euler-Lagrange equation exactly",
            exact_report.max_abs_residual() <= 1e-13,
            format!(
                "residual = {}",
                format_real(exact_report.max_abs_residual())
            ),
        ),
        check(
            "Q = F1/F2 = 2 at the extremal (F1 = 8, F2 = 4)",
            (q_exact - 2.0).abs() <= 1e-14
                && (exact_report.f_values[0] - 8.0).abs() <= 1e-13
                && (exact_report.f_values[1] - 4.0).abs() <= 1e-13,
            format!("Q = {}", format_real(q_exact)),
        ),
        check(
            "solver recovers -2t from a perturbed start",
            result.status == SolveStatus::Converged && sup <= 1e-9,
            format!(
                "status {}, sup|x + 2t| = {}",
                result.status,
                format_real(sup)
            ),
        ),
        check(
            "solved Q within 1e-10 of 2",
            (solved_q - 2.0).abs() <= 1e-10,
            format!("Q = {}", format_real(solved_q)),
        ),
    ];

    let mut extra = Node::map();
    extra.push("scale", Node::num_list(ts.points()));
    extra.push("f_values", Node::num_list(&exact_report.f_values));
    extra.push("q", Node::Num(q_exact));
    extra.push("residual", Node::Num(exact_report.max_abs_residual()));
    extra.push("solve", solve_result_node(&result));
    finish_reproduce("ex2", checks, extra, output, started)
}

/// Product example on {−1, −1/2, 0}: no extremizer exists.
fn reproduce_ex1_3pt(output: OutputMode, started: Instant) -> CliResult {
    let ts = Arc::new(TimeScale::explicit(&[-1.0, -0.5, 0.0]).unwrap());
    let p = VariationalProblem::new(
        Arc::clone(&ts),
        -1.0,
        0.0,
        ex1_functional(),
        BoundaryCondition::Fixed(1.0),
        BoundaryCondition::Fixed(0.0),
    )
    .unwrap();

    // exact cubic profile of L(m) via divided differences on 0..3
    let l_of = |m: f64| {
        let x = GridFunction::from_values(Arc::clone(&ts), vec![1.0, m, 0.0]).unwrap();
        eval_functional(&p, &x).unwrap()
    };
    let values: Vec<f64> = [0.0, 1.0, 2.0, 3.0].iter().map(|&m| l_of(m)).collect();
    let d1: Vec<f64> = (0..3).map(|i| values[i + 1] - values[i]).collect();
    let d2: Vec<f64> = (0..2).map(|i| d1[i + 1] - d1[i]).collect();
    let a3 = (d2[1] - d2[0]) / 6.0;
    let a2 = d2[0] / 2.0 - 3.0 * a3;
    let a1 = d1[0] - a2 - a3;
    let (da, db, dc) = (3.0 * a3, 2.0 * a2, a1);
    let discriminant = db * db - 4.0 * da * dc;

    let scan = stationary_scan_1d(&p, -0.5, (-10.0, 10.0), 10_000, &SolveOptions::default())?;

    // the Q-constant system for this scale, rational in q2
    let vars = ["q1", "q2"];
    let r1 = parse_expr("1 + q1^2/(64*q2^2) - q1", &vars).unwrap();
    let r2 = parse_expr("1/4 - q1/(32*q2) - q2", &vars).unwrap();
    let guard = parse_expr("q2", &vars).unwrap();
    let qsys = solve_q_system(&[r1, r2], &[guard], &SolveOptions::default())?;

    let checks = vec![
        check(
            "dL/dm = -6m^2 + 8m - 3 (from the exact cubic profile of L)",
            (da + 6.0).abs() <= 1e-12 && (db - 8.0).abs() <= 1e-12 && (dc + 3.0).abs() <= 1e-12,
            format!("dL/dm = {da}m^2 + {db}m + {dc}"),
        ),
        check(
            "discriminant is -8: no real stationary point",
            (discriminant + 8.0).abs() <= 1e-12,
            format!("discriminant = {discriminant}"),
        ),
        check(
            "scan over [-10, 10] finds no stationary point",
            scan.roots.is_empty() && scan.status() == SolveStatus::NoStationaryPoint,
            format!(
                "{} roots, |dL/dm| floor {} at m = {:.6}",
                scan.roots.len(),
                format_real(scan.derivative_floor),
                scan.floor_location
            ),
        ),
        check(
            "|dL/dm| floor exceeds 0.1",
            scan.derivative_floor > 0.1,
            format!("floor = {}", format_real(scan.derivative_floor)),
        ),
        check(
            "Q-constant system has no real solutions",
            qsys.no_real_solutions,
            format!(
                "scan floor {} over {} points",
                format_real(qsys.scan_floor),
                qsys.scan_points
            ),
        ),
    ];

    let mut extra = Node::map();
    extra.push("scale", Node::num_list(ts.points()));
    extra.push("cubic", Node::num_list(&[a3, a2, a1, values[0]]));
    extra.push("derivative", Node::num_list(&[da, db, dc]));
    extra.push("discriminant", Node::Num(discriminant));
    extra.push("scan_floor", Node::Num(scan.derivative_floor));
    extra.push("qsystem_floor", Node::Num(qsys.scan_floor));
    finish_reproduce("ex1-3pt", checks, extra, output, started)
}

/// Product example on the uniform grid approximating T = R.
fn reproduce_ex1_real(output: OutputMode, started: Instant) -> CliResult {
    let n = 1000;
    let ts = Arc::new(TimeScale::uniform(-1.0, 0.0, n).unwrap());
    let p = VariationalProblem::new(
        Arc::clone(&ts),
        -1.0,
        0.0,
        ex1_functional(),
        BoundaryCondition::Fixed(1.0),
        BoundaryCondition::Fixed(0.0),
    )
    .unwrap();
    let result = solver::direct_minimize(&p, &SolveOptions::default())?;
    let sol = result
        .solution
        .as_ref()
        .ok_or_else(|| CliError::Domain(result.message.clone()))?;
    let sup = ts
        .points()
        .iter()
        .zip(sol.values())
        .map(|(&t, &v)| (v - (-t * t - 2.0 * t)).abs())
        .fold(0.0_f64, f64::max);
    let floor = result
        .report
        .as_ref()
        .map(|r| r.max_abs_residual())
        .unwrap_or(f64::INFINITY);
    let h = 1.0 / n as f64;
    let predicted = 2.0 * h / (1.0 + h);
    let f1 = result.f_values[0];
    let f2 = result.f_values[1];

    // the cleared Q-system of the continuum analysis
    let vars = ["q1", "q2"];
    let r1 = parse_expr("48*q2^2 + q1^2 - 48*q2^2*q1", &vars).unwrap();
    let r2 = parse_expr("12*q2 - q1 - 24*q2^2", &vars).unwrap();
    let guard = parse_expr("q2", &vars).unwrap();
    let qsys = solve_q_system(&[r1, r2], &[guard], &SolveOptions::default())?;
    let root_ok = qsys.roots.len() == 1
        && (qsys.roots[0].values[0] - 4.0 / 3.0).abs() <= 1e-6
        && (qsys.roots[0].values[1] - 1.0 / 3.0).abs() <= 1e-6
        && qsys.roots[0].residual_norm <= 1e-10;
    let excluded_ok = qsys.excluded.len() == 1
        && qsys.excluded[0].values.iter().all(|v| v.abs() <= 1e-6)
        && qsys.excluded[0].guard == "q2";

    let checks = vec![
        check(
            "trajectory approaches -t^2 - 2t (sup error <= 1e-2)",
            sup <= 1e-2,
            format!("sup error = {}", format_real(sup)),
        ),
        check(
            "F1 within 1e-2 of 4/3 and F2 within 5e-3 of 1/3",
            (f1 - 4.0 / 3.0).abs() <= 1e-2 && (f2 - 1.0 / 3.0).abs() <= 5e-3,
            format!("F1 = {}, F2 = {}", format_real(f1), format_real(f2)),
        ),
        check(
            "residual floor equals the grid bound 2h/(1+h) (no exact \
             discrete extremal exists at finite N)",
            (floor - predicted).abs() <= 1e-6,
            format!(
                "floor = {}, predicted = {}",
                format_real(floor),
                format_real(predicted)
            ),
        ),
        check(
            "Q-system root (4/3, 1/3) with residual <= 1e-10",
            root_ok,
            format!(
                "roots = {:?}",
                qsys.roots
                    .iter()
                    .map(|r| r.values.clone())
                    .collect::<Vec<_>>()
            ),
        ),
        check(
            "(0, 0) excluded by the q2 != 0 guard",
            excluded_ok,
            format!(
                "excluded = {:?}",
                qsys.excluded
                    .iter()
                    .map(|e| (e.values.clone(), e.guard.clone()))
                    .collect::<Vec<_>>()
            ),
        ),
    ];

    let mut extra = Node::map();
    extra.push("n", Node::Int(n as i64));
    extra.push("sup_error", Node::Num(sup));
    extra.push("f_values", Node::num_list(&result.f_values));
    extra.push("residual_floor", Node::Num(floor));
    extra.push("predicted_floor", Node::Num(predicted));
    extra.push("solver_status", Node::Str(result.status.to_string()));
    extra.push("solver_iterations", Node::Int(result.iterations as i64));
    finish_reproduce("ex1-real", checks, extra, output, started)
}
