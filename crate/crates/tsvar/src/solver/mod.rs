//! Extremal finding: a damped-Newton stationarity solver over the free
//! trajectory values, a one-dimensional stationarity scan, and a
//! multi-start solver for the self-referential Q-constant systems.
//!
//! The solver hunts stationary points, not minima: the composed
//! functionals of interest (a product of integrals, say) routinely have
//! extremals that are saddles of the finite-dimensional problem, and the
//! reported object is the trajectory with vanishing Euler-Lagrange and
//! natural-boundary residuals. Convergence is therefore measured on the
//! residual vector itself; descent steps are taken on its squared norm
//! with a backtracking Armijo line search (c₁ = 1e−4, shrink 0.5).

mod linalg;

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::{CompensatedSum, GridFunction};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::variational::{composed, el_residual, BoundaryCondition, ELReport, VariationalProblem};

/// Knobs of the stationarity and Q-system solvers.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// convergence tolerance on the Euler-Lagrange / natural-boundary
    /// residuals (and on the Q-system residual ∞-norm)
    pub tolerance: f64,
    pub max_iterations: usize,
    /// number of multi-start points for Q systems, laid out on a grid
    pub starts: usize,
    /// per-axis start box for Q systems
    pub start_box: (f64, f64),
    /// step for finite-difference fallbacks
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerance: 1e-10,
            max_iterations: 500,
            starts: 16,
            start_box: (-10.0, 10.0),
            fd_step: 1e-6,
            seed: 0,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Usage("tolerance must be positive".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Usage("max_iterations must be at least 1".into()));
        }
        if !(self.start_box.0 < self.start_box.1) {
            return Err(Error::Usage("start box must have lo < hi".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    NoStationaryPoint,
    MaxIterations,
    DomainError,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Converged => "converged",
            SolveStatus::NoStationaryPoint => "no-stationary-point",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::DomainError => "domain-error",
        };
        write!(f, "{s}")
    }
}

/// Pivot signs of an LDLᵀ sweep of the discrete Hessian at the solution.
/// Reported as a diagnostic; the classification of an extremal as a
/// minimizer or maximizer is left to the reader.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HessianInertia {
    pub positive: usize,
    pub negative: usize,
    pub near_zero: usize,
}

impl std::fmt::Display for HessianInertia {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}+ / {}- / {} near zero",
            self.positive, self.negative, self.near_zero
        )
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub solution: Option<GridFunction>,
    pub f_values: Vec<f64>,
    pub report: Option<ELReport>,
    pub iterations: usize,
    pub message: String,
    /// present when the solve converged and the free dimension is small
    /// enough for a dense sweep
    pub hessian_inertia: Option<HessianInertia>,
}

/// Linear interpolation between the boundary anchors, continued as a
/// constant outside [a, b]. Fixed boundary values are met exactly.
pub fn default_init(p: &VariationalProblem) -> GridFunction {
    let pts = p.scale().points();
    let (ia, ib) = (p.a_index(), p.b_index());
    let aval = match p.left_bc() {
        BoundaryCondition::Fixed(v) => v,
        BoundaryCondition::Free => match p.right_bc() {
            BoundaryCondition::Fixed(v) => v,
            BoundaryCondition::Free => 0.0,
        },
    };
    let bval = match p.right_bc() {
        BoundaryCondition::Fixed(v) => v,
        BoundaryCondition::Free => aval,
    };
    let (a, b) = (pts[ia], pts[ib]);
    let values: Vec<f64> = pts
        .iter()
        .map(|&t| {
            if t <= a {
                aval
            } else if t >= b {
                bval
            } else {
                aval + (bval - aval) * (t - a) / (b - a)
            }
        })
        .collect();
    GridFunction::from_values(Arc::clone(p.scale()), values).unwrap()
}

/// The default init with a seeded uniform perturbation on the free values.
pub fn perturbed_init(p: &VariationalProblem, amplitude: f64, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = default_init(p);
    let mut values = base.values().to_vec();
    for j in p.free_indices() {
        values[j] += rng.gen_range(-amplitude..=amplitude);
    }
    GridFunction::from_values(Arc::clone(p.scale()), values).unwrap()
}

/// Gradient of the functional with respect to the free values, assembled
/// from the symbolic partials.
pub fn functional_gradient(p: &VariationalProblem, x: &GridFunction) -> Result<Vec<f64>> {
    let c = composed(p, x)?;
    let func = p.functional();
    let n = func.n();
    let m = c.ts.len();
    let mut fv = vec![Vec::with_capacity(m); n];
    let mut fy = vec![Vec::with_capacity(m); n];
    let mut f_values = Vec::with_capacity(n);
    for (i, fi) in func.integrands().iter().enumerate() {
        let mut acc = CompensatedSum::new();
        for k in 0..m {
            let (t, y, v) = (c.ts[k], c.ys[k], c.vs[k]);
            acc.add(c.nus[k] * fi.eval_f(t, y, v)?);
            fv[i].push(fi.eval_fv(t, y, v)?);
            fy[i].push(fi.eval_fy(t, y, v)?);
        }
        f_values.push(acc.value());
    }
    let h_grad = func.eval_h_grad(&f_values)?;
    let ia = p.a_index();
    let grad = p
        .free_indices()
        .iter()
        .map(|&j| {
            let mut g = 0.0;
            for i in 0..n {
                let mut df = 0.0;
                if j > ia {
                    df += fv[i][j - ia - 1];
                }
                if j - ia < m {
                    let off = j - ia;
                    df += c.nus[off] * fy[i][off] - fv[i][off];
                }
                g += h_grad[i] * df;
            }
            g
        })
        .collect();
    Ok(grad)
}

/// Finds a stationary trajectory starting from the linear-interpolation
/// init. See [`direct_minimize_from`] for the contract.
pub fn direct_minimize(p: &VariationalProblem, opts: &SolveOptions) -> Result<SolveResult> {
    let init = default_init(p);
    direct_minimize_from(p, &init, opts)
}

/// Finds a stationary trajectory of the problem from a given start.
///
/// Damped Newton on the stationarity system with Armijo backtracking on
/// the squared residual norm; the Newton matrix is the exact Hessian of
/// the functional (tridiagonal plus a rank-n correction), assembled from
/// symbolic second partials. Converges when every Euler-Lagrange residual
/// on the assertion set and every applicable natural-boundary residual is
/// within `opts.tolerance`.
///
/// Fixed boundary values are written into the start unconditionally.
/// Values outside [a, b] do not enter the functional and are left as
/// given.
pub fn direct_minimize_from(
    p: &VariationalProblem,
    init: &GridFunction,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    let free = p.free_indices();
    if free.is_empty() {
        return Err(Error::Usage(
            "the problem has no free values to solve for".into(),
        ));
    }
    if init.scale().points() != p.scale().points() {
        return Err(Error::Usage(
            "initial guess is defined on a different time scale".into(),
        ));
    }
    let prep = Prepared::new(p)?;
    let mut values = init.values().to_vec();
    if let BoundaryCondition::Fixed(v) = p.left_bc() {
        values[p.a_index()] = v;
    }
    if let BoundaryCondition::Fixed(v) = p.right_bc() {
        values[p.b_index()] = v;
    }
    let x = GridFunction::from_values(Arc::clone(p.scale()), values)?;
    Ok(stationarity_solve(&prep, x, opts))
}

/// Wraps the residual report into a pass/fail verdict at tolerance `tol`.
pub fn verify_extremal(
    p: &VariationalProblem,
    x: &GridFunction,
    tol: f64,
) -> Result<(bool, ELReport)> {
    let report = el_residual(p, x)?;
    Ok((report.max_abs_residual() <= tol, report))
}

// ---------------------------------------------------------------------
// stationarity solver internals
// ---------------------------------------------------------------------

struct Prepared<'a> {
    p: &'a VariationalProblem,
    /// contiguous free index range [lo, hi] on the scale
    lo: usize,
    hi: usize,
    fyy: Vec<Expr>,
    fyv: Vec<Expr>,
    fvv: Vec<Expr>,
    h_hess: Vec<Vec<Expr>>,
    /// z-components appearing in denominators of H; line-search steps may
    /// not push these below the floor
    guarded: Vec<usize>,
}

const COMPONENT_FLOOR: f64 = 1e-12;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: u32 = 40;
const INERTIA_LIMIT: usize = 300;

impl<'a> Prepared<'a> {
    fn new(p: &'a VariationalProblem) -> Result<Self> {
        let free = p.free_indices();
        let lo = free[0];
        let hi = *free.last().unwrap();
        debug_assert!(free.len() == hi - lo + 1, "free indices are contiguous");
        let func = p.functional();
        let mut fyy = Vec::new();
        let mut fyv = Vec::new();
        let mut fvv = Vec::new();
        for fi in func.integrands() {
            fyy.push(fi.fy().differentiate("y"));
            fyv.push(fi.fy().differentiate("v"));
            fvv.push(fi.fv().differentiate("v"));
        }
        let n = func.n();
        let z_names: Vec<String> = (1..=n).map(|i| format!("z{i}")).collect();
        let h_hess = func
            .h_grad()
            .iter()
            .map(|g| z_names.iter().map(|z| g.differentiate(z)).collect())
            .collect();
        let mut guarded = Vec::new();
        collect_denominator_vars(func.h(), false, &z_names, &mut guarded);
        guarded.sort_unstable();
        guarded.dedup();
        Ok(Prepared {
            p,
            lo,
            hi,
            fyy,
            fyv,
            fvv,
            h_hess,
            guarded,
        })
    }

    fn free_len(&self) -> usize {
        self.hi - self.lo + 1
    }
}

fn collect_denominator_vars(e: &Expr, in_den: bool, z_names: &[String], out: &mut Vec<usize>) {
    match e {
        Expr::Var(name) => {
            if in_den {
                if let Some(i) = z_names.iter().position(|z| z == name) {
                    out.push(i);
                }
            }
        }
        Expr::Const(_) => {}
        Expr::Div(l, r) => {
            collect_denominator_vars(l, in_den, z_names, out);
            collect_denominator_vars(r, true, z_names, out);
        }
        Expr::Pow(base, exp) => {
            let negative = matches!(exp.as_ref(), Expr::Const(c) if *c < 0.0);
            collect_denominator_vars(base, in_den || negative, z_names, out);
            collect_denominator_vars(exp, in_den, z_names, out);
        }
        Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) => {
            collect_denominator_vars(l, in_den, z_names, out);
            collect_denominator_vars(r, in_den, z_names, out);
        }
        Expr::Neg(inner) | Expr::Apply(_, inner) => {
            collect_denominator_vars(inner, in_den, z_names, out);
        }
    }
}

struct State {
    x: GridFunction,
    report: ELReport,
    merit: f64,
}

fn eval_state(p: &VariationalProblem, x: GridFunction) -> Result<State> {
    let report = el_residual(p, &x)?;
    let mut merit = 0.0;
    for r in &report.residuals {
        merit += 0.5 * r * r;
    }
    if let Some(r) = report.left_bc_residual {
        merit += 0.5 * r * r;
    }
    if let Some(r) = report.right_bc_residual {
        merit += 0.5 * r * r;
    }
    Ok(State { x, report, merit })
}

struct NewtonData {
    grad: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
    a_cols: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
    /// finite-difference Hessian, used when a symbolic second partial is
    /// undefined (abs kinks); overrides the structured parts
    dense: Option<Vec<Vec<f64>>>,
}

fn newton_data(prep: &Prepared, x: &GridFunction, fd_step: f64) -> Result<NewtonData> {
    match newton_data_symbolic(prep, x) {
        Ok(nd) => Ok(nd),
        // kinked integrands: fall back to differencing the analytic
        // gradient, which stays defined under numeric partials
        Err(Error::EvalDomain { .. }) if prep.free_len() <= INERTIA_LIMIT => {
            newton_data_fd(prep, x, fd_step)
        }
        Err(e) => Err(e),
    }
}

fn newton_data_fd(prep: &Prepared, x: &GridFunction, fd_step: f64) -> Result<NewtonData> {
    let p = prep.p;
    let grad = functional_gradient(p, x)?;
    let flen = prep.free_len();
    let mut dense = vec![vec![0.0; flen]; flen];
    for (kk, col) in (prep.lo..=prep.hi).enumerate() {
        let shifted = |delta: f64| -> Result<Vec<f64>> {
            let mut values = x.values().to_vec();
            values[col] += delta;
            functional_gradient(
                p,
                &GridFunction::from_values(Arc::clone(x.scale()), values)?,
            )
        };
        let plus = shifted(fd_step)?;
        let minus = shifted(-fd_step)?;
        for j in 0..flen {
            dense[j][kk] = (plus[j] - minus[j]) / (2.0 * fd_step);
        }
    }
    // symmetrize: the exact Hessian is symmetric, the differences are not
    for j in 0..flen {
        for k in j + 1..flen {
            let avg = 0.5 * (dense[j][k] + dense[k][j]);
            dense[j][k] = avg;
            dense[k][j] = avg;
        }
    }
    Ok(NewtonData {
        grad,
        diag: vec![0.0; flen],
        off: vec![0.0; flen.saturating_sub(1)],
        a_cols: Vec::new(),
        s: Vec::new(),
        dense: Some(dense),
    })
}

fn newton_data_symbolic(prep: &Prepared, x: &GridFunction) -> Result<NewtonData> {
    let p = prep.p;
    let c = composed(p, x)?;
    let func = p.functional();
    let n = func.n();
    let m = c.ts.len();
    let ia = p.a_index();
    let flen = prep.free_len();

    let mut fv = vec![vec![0.0; m]; n];
    let mut fy = vec![vec![0.0; m]; n];
    let mut fyy = vec![vec![0.0; m]; n];
    let mut fyv = vec![vec![0.0; m]; n];
    let mut fvv = vec![vec![0.0; m]; n];
    let mut f_values = Vec::with_capacity(n);
    for (i, fi) in func.integrands().iter().enumerate() {
        let mut acc = CompensatedSum::new();
        for k in 0..m {
            let env: &[(&str, f64)] = &[("t", c.ts[k]), ("y", c.ys[k]), ("v", c.vs[k])];
            acc.add(c.nus[k] * fi.eval_f(c.ts[k], c.ys[k], c.vs[k])?);
            fv[i][k] = fi.eval_fv(c.ts[k], c.ys[k], c.vs[k])?;
            fy[i][k] = fi.eval_fy(c.ts[k], c.ys[k], c.vs[k])?;
            fyy[i][k] = prep.fyy[i].eval(env)?;
            fyv[i][k] = prep.fyv[i].eval(env)?;
            fvv[i][k] = prep.fvv[i].eval(env)?;
        }
        f_values.push(acc.value());
    }
    let h_grad = func.eval_h_grad(&f_values)?;
    let z_names: Vec<String> = (1..=n).map(|i| format!("z{i}")).collect();
    let env: Vec<(&str, f64)> = z_names
        .iter()
        .map(|s| s.as_str())
        .zip(f_values.iter().copied())
        .collect();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for l in 0..n {
            s[i][l] = prep.h_hess[i][l].eval(&env)?;
        }
    }

    // ∇Fᵢ over the free range
    let mut a_cols = vec![vec![0.0; flen]; n];
    for (jj, j) in (prep.lo..=prep.hi).enumerate() {
        for i in 0..n {
            let mut df = 0.0;
            if j > ia {
                df += fv[i][j - ia - 1];
            }
            if j - ia < m {
                let off = j - ia;
                df += c.nus[off] * fy[i][off] - fv[i][off];
            }
            a_cols[i][jj] = df;
        }
    }
    let grad = (0..flen)
        .map(|jj| (0..n).map(|i| h_grad[i] * a_cols[i][jj]).sum())
        .collect();

    // Σᵢ H'ᵢ ∇²Fᵢ is tridiagonal: each composed point couples (k−1, k)
    let mut diag = vec![0.0; flen];
    let mut off = vec![0.0; flen.saturating_sub(1)];
    for k in 0..m {
        let w = c.nus[k];
        let mut wyy = 0.0;
        let mut wyv = 0.0;
        let mut wvv = 0.0;
        for i in 0..n {
            wyy += h_grad[i] * fyy[i][k];
            wyv += h_grad[i] * fyv[i][k];
            wvv += h_grad[i] * fvv[i][k];
        }
        let d_prev = w * wyy - 2.0 * wyv + wvv / w;
        let d_cross = wyv - wvv / w;
        let d_here = wvv / w;
        let g_prev = ia + k; // global index of x_{k−1}
        let g_here = ia + k + 1;
        if (prep.lo..=prep.hi).contains(&g_prev) {
            diag[g_prev - prep.lo] += d_prev;
        }
        if (prep.lo..=prep.hi).contains(&g_here) {
            diag[g_here - prep.lo] += d_here;
        }
        if (prep.lo..=prep.hi).contains(&g_prev) && (prep.lo..=prep.hi).contains(&g_here) {
            off[g_prev - prep.lo] += d_cross;
        }
    }

    Ok(NewtonData {
        grad,
        diag,
        off,
        a_cols,
        s,
        dense: None,
    })
}

/// Solves (T + λI + A S Aᵀ) d = −grad by Woodbury with tridiagonal inner
/// solves; a finite-difference Hessian is solved densely.
fn newton_direction(nd: &NewtonData, lambda: f64) -> Option<Vec<f64>> {
    let flen = nd.diag.len();
    let n = nd.a_cols.len();
    let rhs: Vec<f64> = nd.grad.iter().map(|g| -g).collect();
    if let Some(dense) = &nd.dense {
        let mut m = dense.clone();
        for (j, row) in m.iter_mut().enumerate() {
            row[j] += lambda;
        }
        return linalg::solve_dense(m, rhs);
    }
    let diag: Vec<f64> = nd.diag.iter().map(|d| d + lambda).collect();
    if flen == 1 {
        // scalar case, no tridiagonal machinery needed
        let mut h = diag[0];
        for i in 0..n {
            for l in 0..n {
                h += nd.a_cols[i][0] * nd.s[i][l] * nd.a_cols[l][0];
            }
        }
        if h.abs() <= 1e-300 || !h.is_finite() {
            return None;
        }
        return Some(vec![rhs[0] / h]);
    }
    let u = linalg::solve_tridiag(&diag, &nd.off, &rhs)?;
    let s_max =
        nd.s.iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
    if s_max == 0.0 {
        return Some(u);
    }
    let w: Vec<Vec<f64>> = nd
        .a_cols
        .iter()
        .map(|a| linalg::solve_tridiag(&diag, &nd.off, a))
        .collect::<Option<_>>()?;
    let mut b = vec![vec![0.0; n]; n];
    for i in 0..n {
        for l in 0..n {
            let v_il: f64 = nd.a_cols[i].iter().zip(&w[l]).map(|(a, wv)| a * wv).sum();
            // B = I + V S, composed entrywise
            for col in 0..n {
                b[i][col] += v_il * nd.s[l][col];
            }
        }
        b[i][i] += 1.0;
    }
    let z: Vec<f64> = nd
        .a_cols
        .iter()
        .map(|a| a.iter().zip(&u).map(|(ai, ui)| ai * ui).sum())
        .collect();
    let wsol = linalg::solve_dense(b, z)?;
    let sw: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|l| nd.s[i][l] * wsol[l]).sum())
        .collect();
    let mut d = u;
    for i in 0..n {
        for (dj, wj) in d.iter_mut().zip(&w[i]) {
            *dj -= wj * sw[i];
        }
    }
    if d.iter().all(|v| v.is_finite()) {
        Some(d)
    } else {
        None
    }
}

/// Hessian–vector product using the same structure.
fn hessian_matvec(nd: &NewtonData, v: &[f64]) -> Vec<f64> {
    let flen = nd.diag.len();
    let n = nd.a_cols.len();
    if let Some(dense) = &nd.dense {
        return dense
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect();
    }
    let mut out = vec![0.0; flen];
    for j in 0..flen {
        out[j] = nd.diag[j] * v[j];
        if j > 0 {
            out[j] += nd.off[j - 1] * v[j - 1];
        }
        if j + 1 < flen {
            out[j] += nd.off[j] * v[j + 1];
        }
    }
    for i in 0..n {
        let mut sav = 0.0;
        for l in 0..n {
            let al_v: f64 = nd.a_cols[l].iter().zip(v).map(|(a, b)| a * b).sum();
            sav += nd.s[i][l] * al_v;
        }
        for (o, a) in out.iter_mut().zip(&nd.a_cols[i]) {
            *o += a * sav;
        }
    }
    out
}

/// ∇(½‖r‖²) where r is the residual vector: Hess · w with w the
/// graininess-rescaled gradient.
fn merit_gradient(prep: &Prepared, nd: &NewtonData) -> Vec<f64> {
    let p = prep.p;
    let pts = p.scale().points();
    let ia = p.a_index();
    let ib = p.b_index();
    let w: Vec<f64> = (prep.lo..=prep.hi)
        .zip(&nd.grad)
        .map(|(j, g)| {
            if j > ia && j < ib {
                // interior: residual at t_{j+1} is −g_j / ν_{j+1}
                let nu = pts[j + 1] - pts[j];
                g / (nu * nu)
            } else {
                // free endpoint: residual is the gradient entry itself
                *g
            }
        })
        .collect();
    hessian_matvec(nd, &w)
}

fn apply_step(x: &GridFunction, lo: usize, d: &[f64], alpha: f64) -> Result<GridFunction> {
    let mut values = x.values().to_vec();
    for (jj, dj) in d.iter().enumerate() {
        values[lo + jj] += alpha * dj;
    }
    GridFunction::from_values(Arc::clone(x.scale()), values)
}

fn guards_ok(prep: &Prepared, f_values: &[f64]) -> bool {
    prep.guarded
        .iter()
        .all(|&i| f_values[i].abs() >= COMPONENT_FLOOR)
}

fn inertia(prep: &Prepared, nd: &NewtonData) -> Option<HessianInertia> {
    let flen = prep.free_len();
    if flen > INERTIA_LIMIT {
        return None;
    }
    if let Some(dense) = &nd.dense {
        let (positive, negative, near_zero) = linalg::ldlt_inertia(dense.clone());
        return Some(HessianInertia {
            positive,
            negative,
            near_zero,
        });
    }
    let n = nd.a_cols.len();
    let mut dense = vec![vec![0.0; flen]; flen];
    for j in 0..flen {
        dense[j][j] = nd.diag[j];
        if j + 1 < flen {
            dense[j][j + 1] = nd.off[j];
            dense[j + 1][j] = nd.off[j];
        }
    }
    for i in 0..n {
        for l in 0..n {
            let s = nd.s[i][l];
            if s == 0.0 {
                continue;
            }
            for r in 0..flen {
                for cidx in 0..flen {
                    dense[r][cidx] += s * nd.a_cols[i][r] * nd.a_cols[l][cidx];
                }
            }
        }
    }
    let (positive, negative, near_zero) = linalg::ldlt_inertia(dense);
    Some(HessianInertia {
        positive,
        negative,
        near_zero,
    })
}

fn stationarity_solve(prep: &Prepared, x0: GridFunction, opts: &SolveOptions) -> SolveResult {
    let p = prep.p;
    let fail = |status: SolveStatus, message: String, iterations: usize| SolveResult {
        status,
        solution: None,
        f_values: Vec::new(),
        report: None,
        iterations,
        message,
        hessian_inertia: None,
    };

    let init_scale = x0
        .values()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let mut state = match eval_state(p, x0) {
        Ok(s) => s,
        Err(e) => return fail(SolveStatus::DomainError, e.to_string(), 0),
    };
    let init_f_scale = state
        .report
        .f_values
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let mut lambda = 0.0_f64;
    let mut stall_count = 0usize;

    for iter in 0..=opts.max_iterations {
        if state.report.max_abs_residual() <= opts.tolerance {
            let nd = newton_data(prep, &state.x, opts.fd_step).ok();
            return SolveResult {
                status: SolveStatus::Converged,
                f_values: state.report.f_values.clone(),
                hessian_inertia: nd.as_ref().and_then(|nd| inertia(prep, nd)),
                report: Some(state.report),
                solution: Some(state.x),
                iterations: iter,
                message: "stationarity residuals within tolerance".into(),
            };
        }
        if iter == opts.max_iterations {
            break;
        }

        let nd = match newton_data(prep, &state.x, opts.fd_step) {
            Ok(nd) => nd,
            Err(e) => return fail(SolveStatus::DomainError, e.to_string(), iter),
        };
        let gm = merit_gradient(prep, &nd);
        let gm_inf = gm.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

        let mut accepted = None;
        let mut all_trials_domain_failed = true;
        let mut lam = lambda;
        'direction: for attempt in 0..14 {
            let dir = if attempt < 13 {
                match newton_direction(&nd, lam) {
                    Some(d) => d,
                    None => {
                        lam = if lam == 0.0 { 1e-8 } else { lam * 10.0 };
                        continue;
                    }
                }
            } else {
                // last resort: steepest descent on the merit
                gm.iter().map(|g| -g).collect()
            };
            let slope: f64 = gm.iter().zip(&dir).map(|(g, d)| g * d).sum();
            if slope >= 0.0 {
                lam = if lam == 0.0 { 1e-8 } else { lam * 10.0 };
                continue;
            }
            let mut alpha = 1.0_f64;
            for _ in 0..MAX_BACKTRACKS {
                let trial_x = match apply_step(&state.x, prep.lo, &dir, alpha) {
                    Ok(x) => x,
                    Err(_) => {
                        alpha *= 0.5;
                        continue;
                    }
                };
                if let Ok(trial) = eval_state(p, trial_x) {
                    all_trials_domain_failed = false;
                    if guards_ok(prep, &trial.report.f_values)
                        && trial.merit <= state.merit + ARMIJO_C1 * alpha * slope
                    {
                        accepted = Some(trial);
                        break 'direction;
                    }
                }
                alpha *= 0.5;
            }
            lam = if lam == 0.0 { 1e-8 } else { lam * 10.0 };
            if lam > 1e12 {
                break;
            }
        }

        match accepted {
            Some(trial) => {
                let decrease = state.merit - trial.merit;
                if decrease <= 1e-9 * state.merit.max(1e-300)
                    && trial.report.max_abs_residual() > 10.0 * opts.tolerance
                {
                    stall_count += 1;
                } else {
                    stall_count = 0;
                }
                state = trial;
                lambda = (lambda * 0.25).max(0.0);
                if lambda < 1e-14 {
                    lambda = 0.0;
                }
                let x_inf = state.x.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                let f_inf = state
                    .report
                    .f_values
                    .iter()
                    .fold(0.0_f64, |m, v| m.max(v.abs()));
                let diverged = x_inf > 1e3 * init_scale || f_inf > 1e6 * init_f_scale;
                if stall_count >= 8 || diverged {
                    let residual = state.report.max_abs_residual();
                    let why = if diverged {
                        "iterates diverged; the residual decays only because the \
                         outer gradient H' vanishes along the escape direction"
                    } else {
                        "the residual norm bottomed out at a positive floor"
                    };
                    return SolveResult {
                        status: SolveStatus::NoStationaryPoint,
                        f_values: state.report.f_values.clone(),
                        report: Some(state.report),
                        solution: Some(state.x),
                        iterations: iter + 1,
                        message: format!("{why}: max residual {residual:.3e}"),
                        hessian_inertia: None,
                    };
                }
            }
            None => {
                if all_trials_domain_failed {
                    return fail(
                        SolveStatus::DomainError,
                        "no feasible step: the functional is undefined along every \
                         trial direction"
                            .into(),
                        iter,
                    );
                }
                let residual = state.report.max_abs_residual();
                return SolveResult {
                    status: SolveStatus::NoStationaryPoint,
                    solution: Some(state.x),
                    f_values: state.report.f_values.clone(),
                    report: Some(state.report),
                    iterations: iter,
                    message: format!(
                        "residual-norm descent stalled at a positive floor: \
                         max residual {residual:.3e}, merit gradient {gm_inf:.3e}"
                    ),
                    hessian_inertia: None,
                };
            }
        }
    }

    let residual = state.report.max_abs_residual();
    SolveResult {
        status: SolveStatus::MaxIterations,
        f_values: state.report.f_values.clone(),
        report: Some(state.report),
        solution: Some(state.x),
        iterations: opts.max_iterations,
        message: format!("iteration budget exhausted with max residual {residual:.3e}"),
        hessian_inertia: None,
    }
}

// ---------------------------------------------------------------------
// one-dimensional stationarity scan
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ScanRoot {
    pub location: f64,
    /// sample interval that bracketed the sign change
    pub bracket: (f64, f64),
    pub result: SolveResult,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub roots: Vec<ScanRoot>,
    /// smallest |dL/dm| seen over the valid samples
    pub derivative_floor: f64,
    pub floor_location: f64,
    /// subintervals where the functional is undefined
    pub excluded: Vec<(f64, f64)>,
    pub samples: usize,
}

impl ScanResult {
    pub fn status(&self) -> SolveStatus {
        if self.roots.is_empty() {
            SolveStatus::NoStationaryPoint
        } else {
            SolveStatus::Converged
        }
    }
}

/// Scans dL/dm over `range` for the problem's single free value, brackets
/// sign changes, and polishes each bracket into a stationary point.
pub fn stationary_scan_1d(
    p: &VariationalProblem,
    free_point: f64,
    range: (f64, f64),
    samples: usize,
    opts: &SolveOptions,
) -> Result<ScanResult> {
    opts.validate()?;
    let free = p.free_indices();
    if free.len() != 1 {
        return Err(Error::Usage(format!(
            "stationary_scan_1d needs exactly one free value, this problem has {}",
            free.len()
        )));
    }
    let j = free[0];
    if p.scale().locate(free_point)? != j {
        return Err(Error::Usage(format!(
            "free point {free_point} does not match the problem's free value at {}",
            p.scale().points()[j]
        )));
    }
    if samples < 2 || !(range.0 < range.1) {
        return Err(Error::Usage(
            "scan needs lo < hi and at least 2 samples".into(),
        ));
    }

    let template = default_init(p);
    let derivative = |m: f64| -> Result<f64> {
        let mut values = template.values().to_vec();
        values[j] = m;
        let x = GridFunction::from_values(Arc::clone(p.scale()), values)?;
        Ok(functional_gradient(p, &x)?[0])
    };

    let (lo, hi) = range;
    let step = (hi - lo) / (samples - 1) as f64;
    let mut grid: Vec<(f64, Option<f64>)> = Vec::with_capacity(samples);
    for i in 0..samples {
        let m = lo + step * i as f64;
        grid.push((m, derivative(m).ok()));
    }

    let mut excluded = Vec::new();
    let mut run_start: Option<f64> = None;
    for (m, g) in &grid {
        match (g, run_start) {
            (None, None) => run_start = Some(*m),
            (Some(_), Some(start)) => {
                excluded.push((start, *m));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(start) = run_start {
        excluded.push((start, hi));
    }

    let mut derivative_floor = f64::INFINITY;
    let mut floor_location = f64::NAN;
    for (m, g) in &grid {
        if let Some(g) = g {
            if g.abs() < derivative_floor {
                derivative_floor = g.abs();
                floor_location = *m;
            }
        }
    }

    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let ((m0, g0), (m1, g1)) = (w[0], w[1]);
        let (g0, g1) = match (g0, g1) {
            (Some(a), Some(b)) => (a, b),
            _ => continue,
        };
        if g0 == 0.0 || g0 * g1 < 0.0 {
            let mut a = m0;
            let mut b = m1;
            let mut ga = g0;
            let mut root = None;
            if ga == 0.0 {
                root = Some(a);
            } else {
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if (b - a).abs() <= 1e-14 * mid.abs().max(1.0) {
                        root = Some(mid);
                        break;
                    }
                    match derivative(mid) {
                        Ok(gm) => {
                            if gm == 0.0 {
                                root = Some(mid);
                                break;
                            }
                            if ga * gm < 0.0 {
                                b = mid;
                            } else {
                                a = mid;
                                ga = gm;
                            }
                        }
                        Err(_) => break,
                    }
                }
                root = root.or(Some(0.5 * (a + b)));
            }
            if let Some(m) = root {
                let mut values = template.values().to_vec();
                values[j] = m;
                let x = GridFunction::from_values(Arc::clone(p.scale()), values)?;
                let result = direct_minimize_from(p, &x, opts)?;
                let location = result.solution.as_ref().map(|s| s.values()[j]).unwrap_or(m);
                roots.push(ScanRoot {
                    location,
                    bracket: (m0, m1),
                    result,
                });
            }
        }
    }

    Ok(ScanResult {
        roots,
        derivative_floor,
        floor_location,
        excluded,
        samples,
    })
}

// ---------------------------------------------------------------------
// Q-constant systems
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct QRoot {
    pub values: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ExcludedRoot {
    pub values: Vec<f64>,
    pub residual_norm: f64,
    /// the guard expression this root violates
    pub guard: String,
}

#[derive(Debug, Clone)]
pub struct QSystemResult {
    pub roots: Vec<QRoot>,
    pub excluded: Vec<ExcludedRoot>,
    pub starts_attempted: usize,
    pub starts_converged: usize,
    /// minimum of the residual ∞-norm over the dense scan grid
    pub scan_floor: f64,
    pub scan_floor_at: Vec<f64>,
    pub scan_points: usize,
    pub scan_domain_failures: usize,
    /// zero roots found and the scan floor is bounded away from zero
    pub no_real_solutions: bool,
}

/// Threshold the scan floor must clear before a "no real solutions"
/// verdict is issued.
pub const NO_SOLUTION_FLOOR: f64 = 1e-6;

/// Multi-start damped Newton (Levenberg-regularized, symbolic Jacobian)
/// for a small square system in q1…qn. Roots violating a guard
/// expression (|guard| ≤ 1e−8 at the root) are reported separately as
/// excluded. The "no real solutions" verdict requires both that every
/// start failed to produce a root and that a dense scan of the residual
/// norm over the start box stays above [`NO_SOLUTION_FLOOR`].
pub fn solve_q_system(
    residuals: &[Expr],
    guards: &[Expr],
    opts: &SolveOptions,
) -> Result<QSystemResult> {
    opts.validate()?;
    let n = residuals.len();
    if n == 0 || n > 4 {
        return Err(Error::Usage(format!(
            "solve_q_system handles 1 to 4 equations, got {n}"
        )));
    }
    let q_names: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
    for e in residuals.iter().chain(guards.iter()) {
        for v in e.variables() {
            if !q_names.contains(&v) {
                return Err(Error::Usage(format!(
                    "expression `{e}` uses `{v}`; only q1..q{n} are allowed"
                )));
            }
        }
    }
    let jac: Vec<Vec<Expr>> = residuals
        .iter()
        .map(|r| q_names.iter().map(|q| r.differentiate(q)).collect())
        .collect();

    let env_of = |q: &[f64]| -> Vec<(&str, f64)> {
        q_names
            .iter()
            .map(|s| s.as_str())
            .zip(q.iter().copied())
            .collect()
    };
    let eval_res = |q: &[f64]| -> Result<Vec<f64>> {
        let env = env_of(q);
        residuals.iter().map(|r| r.eval(&env)).collect()
    };
    let eval_jac = |q: &[f64]| -> Result<Vec<Vec<f64>>> {
        let env = env_of(q);
        jac.iter()
            .map(|row| row.iter().map(|e| e.eval(&env)).collect())
            .collect()
    };
    let inf = |r: &[f64]| r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    // one damped-Newton run; iterates to its numerical floor so repeated
    // starts land on the same point even at degenerate roots
    let newton_run = |start: &[f64]| -> Option<QRoot> {
        let mut q = start.to_vec();
        let mut r = eval_res(&q).ok()?;
        let mut merit: f64 = r.iter().map(|v| 0.5 * v * v).sum();
        let mut lam = 0.0_f64;
        let mut iterations = 0;
        for _ in 0..opts.max_iterations {
            let j = match eval_jac(&q) {
                Ok(j) => j,
                Err(_) => break,
            };
            // JᵀJ and Jᵀr
            let mut jtj = vec![vec![0.0; n]; n];
            let mut jtr = vec![0.0; n];
            for row in 0..n {
                for a in 0..n {
                    jtr[a] += j[row][a] * r[row];
                    for b in 0..n {
                        jtj[a][b] += j[row][a] * j[row][b];
                    }
                }
            }
            let mut stepped = false;
            for _ in 0..30 {
                let mut m = jtj.clone();
                for (d, row) in m.iter_mut().enumerate() {
                    row[d] += lam;
                }
                let d = match linalg::solve_dense(m, jtr.iter().map(|v| -v).collect()) {
                    Some(d) => d,
                    None => {
                        lam = if lam == 0.0 { 1e-10 } else { lam * 10.0 };
                        continue;
                    }
                };
                let qt: Vec<f64> = q.iter().zip(&d).map(|(a, b)| a + b).collect();
                match eval_res(&qt) {
                    Ok(rt) => {
                        let mt: f64 = rt.iter().map(|v| 0.5 * v * v).sum();
                        if mt < merit {
                            let step = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                            q = qt;
                            r = rt;
                            let stalled = merit - mt <= 1e-12 * merit.max(1e-300);
                            merit = mt;
                            lam *= 0.25;
                            if lam < 1e-14 {
                                lam = 0.0;
                            }
                            iterations += 1;
                            stepped = true;
                            if stalled || step <= 1e-14 * (1.0 + inf(&q)) {
                                // at the numerical floor
                                return finish(q, r, iterations, opts.tolerance);
                            }
                            break;
                        }
                        lam = if lam == 0.0 { 1e-10 } else { lam * 10.0 };
                    }
                    Err(_) => {
                        lam = if lam == 0.0 { 1e-10 } else { lam * 10.0 };
                    }
                }
                if lam > 1e14 {
                    break;
                }
            }
            if !stepped {
                break;
            }
        }
        finish(q, r, iterations, opts.tolerance)
    };

    fn finish(q: Vec<f64>, r: Vec<f64>, iterations: usize, tol: f64) -> Option<QRoot> {
        let norm = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if norm <= tol {
            Some(QRoot {
                values: q,
                residual_norm: norm,
                iterations,
            })
        } else {
            None
        }
    }

    // deterministic start grid: midpoints of a per-axis partition
    let per_axis = (opts.starts as f64).powf(1.0 / n as f64).ceil().max(1.0) as usize;
    let (blo, bhi) = opts.start_box;
    let width = bhi - blo;
    let mut starts: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for s in &starts {
            for i in 0..per_axis {
                let mut s2 = s.clone();
                s2.push(blo + width * (i as f64 + 0.5) / per_axis as f64);
                next.push(s2);
            }
        }
        starts = next;
    }

    let mut candidates: Vec<QRoot> = Vec::new();
    let mut starts_converged = 0;
    let starts_attempted = starts.len();
    for start in &starts {
        if let Some(root) = newton_run(start) {
            starts_converged += 1;
            candidates.push(root);
        }
    }

    // dense scan: floor for the nonexistence verdict, plus low spots to
    // polish in case the start grid missed a basin
    let res_per_axis = match n {
        1 => 1001,
        2 => 201,
        3 => 41,
        _ => 17,
    };
    let mut scan_floor = f64::INFINITY;
    let mut scan_floor_at = vec![f64::NAN; n];
    let mut scan_domain_failures = 0;
    let mut scan_points = 0;
    let mut low_spots: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let q: Vec<f64> = idx
            .iter()
            .map(|&i| blo + width * i as f64 / (res_per_axis - 1) as f64)
            .collect();
        scan_points += 1;
        match eval_res(&q) {
            Ok(r) => {
                let norm = inf(&r);
                if norm < scan_floor {
                    scan_floor = norm;
                    scan_floor_at = q.clone();
                }
                low_spots.push((norm, q));
                if low_spots.len() > 4096 {
                    low_spots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                    low_spots.truncate(64);
                }
            }
            Err(_) => scan_domain_failures += 1,
        }
        // odometer increment
        let mut axis = 0;
        loop {
            if axis == n {
                break;
            }
            idx[axis] += 1;
            if idx[axis] < res_per_axis {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
        if axis == n {
            break;
        }
    }
    low_spots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let grid_step = width / (res_per_axis - 1) as f64;
    let mut polished_from: Vec<Vec<f64>> = Vec::new();
    for (_, q) in low_spots.iter().take(64) {
        let close = polished_from.iter().any(|p| {
            p.iter()
                .zip(q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                <= 2.0 * grid_step
        });
        if close || polished_from.len() >= 8 {
            continue;
        }
        polished_from.push(q.clone());
        if let Some(root) = newton_run(q) {
            candidates.push(root);
        }
    }

    // dedup: 1e−8 coordinate distance, plus a connectivity merge for
    // degenerate roots, where noise leaves a whole low-residual ball —
    // two candidates whose midpoint still meets the tolerance are the
    // same root
    candidates.sort_by(|a, b| {
        a.residual_norm
            .partial_cmp(&b.residual_norm)
            .unwrap()
            .then_with(|| a.values.partial_cmp(&b.values).unwrap())
    });
    let mut found: Vec<QRoot> = Vec::new();
    for cand in candidates {
        let mut dup = false;
        for kept in &found {
            let dist = kept
                .values
                .iter()
                .zip(&cand.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist <= 1e-8 {
                dup = true;
                break;
            }
            if dist <= 1e-4 {
                let mid: Vec<f64> = kept
                    .values
                    .iter()
                    .zip(&cand.values)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                if let Ok(r) = eval_res(&mid) {
                    if inf(&r) <= opts.tolerance {
                        dup = true;
                        break;
                    }
                }
            }
        }
        if !dup {
            found.push(cand);
        }
    }

    // guard classification
    let mut roots = Vec::new();
    let mut excluded = Vec::new();
    for root in found {
        let env = env_of(&root.values);
        let violation = guards.iter().find(|g| match g.eval(&env) {
            Ok(v) => v.abs() <= 1e-8,
            Err(_) => true,
        });
        match violation {
            Some(g) => excluded.push(ExcludedRoot {
                values: root.values,
                residual_norm: root.residual_norm,
                guard: g.to_string(),
            }),
            None => roots.push(root),
        }
    }
    roots.sort_by(|a, b| a.values.partial_cmp(&b.values).unwrap());
    excluded.sort_by(|a, b| a.values.partial_cmp(&b.values).unwrap());

    let no_real_solutions =
        roots.is_empty() && excluded.is_empty() && scan_floor > NO_SOLUTION_FLOOR;

    Ok(QSystemResult {
        roots,
        excluded,
        starts_attempted,
        starts_converged,
        scan_floor,
        scan_floor_at,
        scan_points,
        scan_domain_failures,
        no_real_solutions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::timescale::TimeScale;
    use crate::variational::CompositeFunctional;

    fn scale(points: &[f64]) -> Arc<TimeScale> {
        Arc::new(TimeScale::explicit(points).unwrap())
    }

    fn problem(
        ts: &Arc<TimeScale>,
        h: &str,
        fs: &[&str],
        left: BoundaryCondition,
        right: BoundaryCondition,
    ) -> VariationalProblem {
        let func = CompositeFunctional::parse(h, fs).unwrap();
        VariationalProblem::new(Arc::clone(ts), ts.min(), ts.max(), func, left, right).unwrap()
    }

    #[test]
    fn perfect_square_integrand_minimizes_to_identity() {
        let ts = Arc::new(TimeScale::uniform(0.0, 1.0, 10).unwrap());
        let p = problem(
            &ts,
            "z1",
            &["(v - 1)^2"],
            BoundaryCondition::Fixed(0.0),
            BoundaryCondition::Fixed(1.0),
        );
        let init = perturbed_init(&p, 0.5, 3);
        let result = direct_minimize_from(&p, &init, &SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::Converged, "{}", result.message);
        let sol = result.solution.unwrap();
        for (t, v) in ts.points().iter().zip(sol.values()) {
            assert!((v - t).abs() <= 1e-8, "x({t}) = {v}");
        }
        let value = crate::variational::eval_functional(&p, &sol).unwrap();
        assert!(value.abs() <= 1e-16);
        // strict minimum: every pivot positive
        let inertia = result.hessian_inertia.unwrap();
        assert_eq!(inertia.negative, 0);
        assert_eq!(inertia.near_zero, 0);
    }

    #[test]
    fn quotient_example_converges_to_linear_solution() {
        let ts = scale(&[-2.0, -1.5, -0.7, 0.0]);
        let p = problem(
            &ts,
            "z1/z2",
            &["v^2", "v + v^2"],
            BoundaryCondition::Fixed(4.0),
            BoundaryCondition::Fixed(0.0),
        );
        let init = perturbed_init(&p, 0.3, 11);
        let opts = SolveOptions {
            tolerance: 1e-12,
            ..SolveOptions::default()
        };
        let result = direct_minimize_from(&p, &init, &opts).unwrap();
        assert_eq!(result.status, SolveStatus::Converged, "{}", result.message);
        let sol = result.solution.unwrap();
        for (t, v) in ts.points().iter().zip(sol.values()) {
            assert!((v - (-2.0 * t)).abs() <= 1e-9, "x({t}) = {v}");
        }
        let q = result.f_values[0] / result.f_values[1];
        assert!((q - 2.0).abs() <= 1e-10, "Q = {q}");
    }

    #[test]
    fn product_example_on_three_points_has_no_stationary_point() {
        let ts = scale(&[-1.0, -0.5, 0.0]);
        let p = problem(
            &ts,
            "z1*z2",
            &["v^2", "t*v"],
            BoundaryCondition::Fixed(1.0),
            BoundaryCondition::Fixed(0.0),
        );
        let result = direct_minimize(&p, &SolveOptions::default()).unwrap();
        assert_eq!(
            result.status,
            SolveStatus::NoStationaryPoint,
            "{}",
            result.message
        );
    }

    #[test]
    fn solver_is_deterministic() {
        let ts = scale(&[-2.0, -1.5, -0.7, 0.0]);
        let p = problem(
            &ts,
            "z1/z2",
            &["v^2", "v + v^2"],
            BoundaryCondition::Fixed(4.0),
            BoundaryCondition::Fixed(0.0),
        );
        let run = || {
            let init = perturbed_init(&p, 0.8, 42);
            let r = direct_minimize_from(&p, &init, &SolveOptions::default()).unwrap();
            (
                r.iterations,
                r.solution
                    .unwrap()
                    .values()
                    .iter()
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>(),
                r.f_values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            )
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn recomputed_components_match_reported_ones() {
        let ts = scale(&[-2.0, -1.5, -0.7, 0.0]);
        let p = problem(
            &ts,
            "z1/z2",
            &["v^2", "v + v^2"],
            BoundaryCondition::Fixed(4.0),
            BoundaryCondition::Fixed(0.0),
        );
        let result = direct_minimize(&p, &SolveOptions::default()).unwrap();
        let sol = result.solution.as_ref().unwrap();
        let again = crate::variational::eval_components(&p, sol).unwrap();
        for (a, b) in result.f_values.iter().zip(&again) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ts = scale(&[0.0, 0.4, 1.0, 1.7, 2.0, 2.6]);
        let p = problem(
            &ts,
            "z1*z2",
            &["v^2 + sin(y)", "t*v + y^2"],
            BoundaryCondition::Fixed(0.5),
            BoundaryCondition::Fixed(-0.5),
        );
        let x = perturbed_init(&p, 0.7, 5);
        let grad = functional_gradient(&p, &x).unwrap();
        let free = p.free_indices();
        let h = 1e-6;
        for (jj, &j) in free.iter().enumerate() {
            let mut plus = x.values().to_vec();
            plus[j] += h;
            let mut minus = x.values().to_vec();
            minus[j] -= h;
            let fp = crate::variational::eval_functional(
                &p,
                &GridFunction::from_values(Arc::clone(&ts), plus).unwrap(),
            )
            .unwrap();
            let fm = crate::variational::eval_functional(
                &p,
                &GridFunction::from_values(Arc::clone(&ts), minus).unwrap(),
            )
            .unwrap();
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (grad[jj] - fd).abs() <= 1e-6 * grad[jj].abs().max(1.0),
                "entry {jj}: symbolic {} vs fd {fd}",
                grad[jj]
            );
        }
    }

    #[test]
    fn scan_finds_simple_roots() {
        // F(m) = (x0−1)² + (m−1)² over the free midpoint: root at m = 1
        let ts = scale(&[0.0, 1.0, 2.0]);
        let p = problem(
            &ts,
            "z1",
            &["(y - 1)^2"],
            BoundaryCondition::Fixed(0.0),
            BoundaryCondition::Fixed(0.0),
        );
        let scan =
            stationary_scan_1d(&p, 1.0, (-10.0, 10.0), 4001, &SolveOptions::default()).unwrap();
        assert_eq!(scan.roots.len(), 1);
        assert!((scan.roots[0].location - 1.0).abs() <= 1e-8);
        assert_eq!(scan.roots[0].result.status, SolveStatus::Converged);

        // F(m) = m³ − 3m: stationary at m = ±1
        let p = problem(
            &ts,
            "z1",
            &["y^3 - 3*y"],
            BoundaryCondition::Fixed(0.0),
            BoundaryCondition::Fixed(0.0),
        );
        let scan =
            stationary_scan_1d(&p, 1.0, (-10.0, 10.0), 4001, &SolveOptions::default()).unwrap();
        assert_eq!(scan.roots.len(), 2);
        let mut locs: Vec<f64> = scan.roots.iter().map(|r| r.location).collect();
        locs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((locs[0] + 1.0).abs() <= 1e-8);
        assert!((locs[1] - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn scan_reports_no_roots_for_the_three_point_product_example() {
        let ts = scale(&[-1.0, -0.5, 0.0]);
        let p = problem(
            &ts,
            "z1*z2",
            &["v^2", "t*v"],
            BoundaryCondition::Fixed(1.0),
            BoundaryCondition::Fixed(0.0),
        );
        let scan =
            stationary_scan_1d(&p, -0.5, (-10.0, 10.0), 10_000, &SolveOptions::default()).unwrap();
        assert!(scan.roots.is_empty());
        assert_eq!(scan.status(), SolveStatus::NoStationaryPoint);
        // dL/dm = −6m² + 8m − 3 peaks at −1/3
        assert!(scan.derivative_floor > 0.1);
        assert!((scan.derivative_floor - 1.0 / 3.0).abs() <= 1e-3);
        assert!((scan.floor_location - 2.0 / 3.0).abs() <= 2e-3);
        assert!(scan.excluded.is_empty());
    }

    #[test]
    fn scan_requires_exactly_one_free_value() {
        let ts = scale(&[0.0, 0.5, 1.0, 2.0]);
        let p = problem(
            &ts,
            "z1",
            &["v^2"],
            BoundaryCondition::Fixed(0.0),
            BoundaryCondition::Fixed(1.0),
        );
        assert!(matches!(
            stationary_scan_1d(&p, 0.5, (-1.0, 1.0), 100, &SolveOptions::default()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn linear_q_system_solves_in_one_newton_step() {
        let r1 = parse("q1 - 2", &["q1", "q2"]).unwrap();
        let r2 = parse("q2 + 1", &["q1", "q2"]).unwrap();
        let result = solve_q_system(&[r1, r2], &[], &SolveOptions::default()).unwrap();
        assert_eq!(result.roots.len(), 1);
        let root = &result.roots[0];
        assert!((root.values[0] - 2.0).abs() <= 1e-12);
        assert!((root.values[1] + 1.0).abs() <= 1e-12);
        assert!(root.iterations <= 2, "iterations {}", root.iterations);
        assert!(!result.no_real_solutions);
    }

    #[test]
    fn cleared_product_system_finds_admissible_root_and_excludes_origin() {
        let vars = ["q1", "q2"];
        let r1 = parse("48*q2^2 + q1^2 - 48*q2^2*q1", &vars).unwrap();
        let r2 = parse("12*q2 - q1 - 24*q2^2", &vars).unwrap();
        let guard = parse("q2", &vars).unwrap();
        let result = solve_q_system(&[r1, r2], &[guard], &SolveOptions::default()).unwrap();
        assert_eq!(result.roots.len(), 1, "roots: {:?}", result.roots);
        let root = &result.roots[0];
        assert!((root.values[0] - 4.0 / 3.0).abs() <= 1e-6, "{:?}", root);
        assert!((root.values[1] - 1.0 / 3.0).abs() <= 1e-6, "{:?}", root);
        assert!(root.residual_norm <= 1e-10);
        assert_eq!(result.excluded.len(), 1, "excluded: {:?}", result.excluded);
        let ex = &result.excluded[0];
        assert!(ex.values[0].abs() <= 1e-6 && ex.values[1].abs() <= 1e-6);
        assert_eq!(ex.guard, "q2");
    }

    #[test]
    fn three_point_system_has_no_real_solutions() {
        let vars = ["q1", "q2"];
        let r1 = parse("1 + q1^2/(64*q2^2) - q1", &vars).unwrap();
        let r2 = parse("1/4 - q1/(32*q2) - q2", &vars).unwrap();
        let guard = parse("q2", &vars).unwrap();
        let result = solve_q_system(&[r1, r2], &[guard], &SolveOptions::default()).unwrap();
        assert!(result.roots.is_empty(), "roots: {:?}", result.roots);
        assert!(result.excluded.is_empty());
        assert!(result.no_real_solutions);
        assert!(result.scan_floor > NO_SOLUTION_FLOOR);
        assert!(result.scan_domain_failures > 0, "q2 = 0 rows are excluded");
    }

    #[test]
    fn verify_extremal_accepts_sampled_continuum_extremal_at_grid_tolerance() {
        let ts = Arc::new(crate::timescale::TimeScale::uniform(-1.0, 0.0, 1000).unwrap());
        let p = problem(
            &ts,
            "z1*z2",
            &["v^2", "t*v"],
            BoundaryCondition::Fixed(1.0),
            BoundaryCondition::Fixed(0.0),
        );
        let x = GridFunction::from_fn(Arc::clone(&ts), |t| -t * t - 2.0 * t).unwrap();
        let (ok, report) = verify_extremal(&p, &x, 5e-2).unwrap();
        assert!(ok, "max residual {}", report.max_abs_residual());
        // and it is honestly nonzero at the grid level
        assert!(report.max_abs_residual() > 1e-3);
    }

    #[test]
    fn abs_integrand_solves_through_the_fd_hessian_fallback() {
        // the candidate passes through y = 0 at a grid point, so the
        // symbolic second partials hit sign(0); numeric first partials
        // plus the finite-difference Hessian carry the solve
        let ts = scale(&[-1.0, -0.5, 0.0, 0.5, 1.0]);
        let f = crate::expr::parse("(v - 1)^2 + 0.25*abs(y)", &["t", "y", "v"]).unwrap();
        let integrand = crate::variational::Integrand::with_numeric_partials(f, 1e-6).unwrap();
        let func = crate::variational::CompositeFunctional::new(
            crate::expr::parse("z1", &["z1"]).unwrap(),
            vec![integrand],
        )
        .unwrap();
        let p = VariationalProblem::new(
            Arc::clone(&ts),
            -1.0,
            1.0,
            func,
            BoundaryCondition::Fixed(-1.0),
            BoundaryCondition::Fixed(1.0),
        )
        .unwrap();
        let opts = SolveOptions {
            tolerance: 1e-8,
            ..SolveOptions::default()
        };
        let result = direct_minimize(&p, &opts).unwrap();
        assert_eq!(result.status, SolveStatus::Converged, "{}", result.message);
        let report = result.report.unwrap();
        assert!(report.max_abs_residual() <= 1e-8);
    }

    #[test]
    fn solver_works_on_q_scales() {
        let ts = Arc::new(crate::timescale::TimeScale::q_scale(2.0, 1.0, 8.0).unwrap());
        let p = problem(
            &ts,
            "z1",
            &["(v - 1)^2"],
            BoundaryCondition::Fixed(0.0),
            BoundaryCondition::Fixed(7.0),
        );
        let init = perturbed_init(&p, 0.5, 9);
        let result = direct_minimize_from(&p, &init, &SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::Converged, "{}", result.message);
        let sol = result.solution.unwrap();
        for (t, v) in ts.points().iter().zip(sol.values()) {
            assert!((v - (t - 1.0)).abs() <= 1e-9, "x({t}) = {v}");
        }
    }

    #[test]
    fn verify_extremal_passes_and_fails_correctly() {
        let ts = scale(&[-2.0, -1.0, 0.0]);
        let p = problem(
            &ts,
            "z1/z2",
            &["v^2", "v + v^2"],
            BoundaryCondition::Fixed(4.0),
            BoundaryCondition::Fixed(0.0),
        );
        let x = GridFunction::from_fn(Arc::clone(&ts), |t| -2.0 * t).unwrap();
        let (ok, report) = verify_extremal(&p, &x, 1e-9).unwrap();
        assert!(ok);
        assert!(report.max_abs_residual() <= 1e-13);

        let mut values = x.values().to_vec();
        values[1] += 0.1;
        let bad = GridFunction::from_values(Arc::clone(&ts), values).unwrap();
        let (ok, _) = verify_extremal(&p, &bad, 1e-9).unwrap();
        assert!(!ok);
    }
}
