//! Composed variational functionals H(F₁, …, Fₙ) of the backwards calculus
//! of variations, their Euler-Lagrange residuals, and the natural boundary
//! conditions at free endpoints.
//!
//! Each component is the nabla integral Fᵢ = ∫_a^b fᵢ(t, x^ρ(t), x^∇(t)) ∇t.
//! The Euler-Lagrange residual at a point t is
//!
//! ```text
//! Σᵢ H'ᵢ(F₁, …, Fₙ) · [ (f_iv)^∇(t) − f_iy(t) ]
//! ```
//!
//! where (f_iv)^∇ is the nabla derivative of the composed signal
//! t ↦ f_iv(t, x^ρ(t), x^∇(t)). That signal lives on (a, b] of the scale,
//! so its nabla derivative — and hence the residual — is asserted on (a, b]
//! minus its first point. H'ᵢ are always evaluated at the F values of the
//! candidate at hand, and reports carry those values.

use std::sync::Arc;

use crate::calculus::{CompensatedSum, GridFunction};
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::timescale::TimeScale;

pub const INTEGRAND_VARS: [&str; 3] = ["t", "y", "v"];

/// Relative slack allowed when checking that a candidate meets its fixed
/// boundary values: one rounding unit, not a modelling tolerance.
const BC_RTOL: f64 = 1e-12;

/// One integrand f(t, y, v) with its symbolic partials ∂f/∂y and ∂f/∂v.
///
/// The partials are always regenerated from `f`, never supplied by hand.
/// For expressions containing `abs` the symbolic partials have kinks; the
/// `numeric_partials` flag switches their evaluation to central finite
/// differences of `f` instead.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrand {
    f: Expr,
    fy: Expr,
    fv: Expr,
    numeric_partials: bool,
    fd_step: f64,
}

impl Integrand {
    pub fn new(f: Expr) -> Result<Self> {
        Self::build(f, false, 1e-6)
    }

    pub fn with_numeric_partials(f: Expr, fd_step: f64) -> Result<Self> {
        Self::build(f, true, fd_step)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(parse(text, &INTEGRAND_VARS)?)
    }

    fn build(f: Expr, numeric_partials: bool, fd_step: f64) -> Result<Self> {
        for v in f.variables() {
            if !INTEGRAND_VARS.contains(&v.as_str()) {
                return Err(Error::InvalidProblem(format!(
                    "integrand `{f}` uses `{v}`; only t, y, v are allowed"
                )));
            }
        }
        let fy = f.differentiate("y");
        let fv = f.differentiate("v");
        Ok(Integrand {
            f,
            fy,
            fv,
            numeric_partials,
            fd_step,
        })
    }

    pub fn f(&self) -> &Expr {
        &self.f
    }

    pub fn fy(&self) -> &Expr {
        &self.fy
    }

    pub fn fv(&self) -> &Expr {
        &self.fv
    }

    pub fn uses_numeric_partials(&self) -> bool {
        self.numeric_partials
    }

    pub fn eval_f(&self, t: f64, y: f64, v: f64) -> Result<f64> {
        self.f.eval(&[("t", t), ("y", y), ("v", v)])
    }

    pub fn eval_fy(&self, t: f64, y: f64, v: f64) -> Result<f64> {
        if self.numeric_partials {
            let h = self.fd_step;
            Ok((self.eval_f(t, y + h, v)? - self.eval_f(t, y - h, v)?) / (2.0 * h))
        } else {
            self.fy.eval(&[("t", t), ("y", y), ("v", v)])
        }
    }

    pub fn eval_fv(&self, t: f64, y: f64, v: f64) -> Result<f64> {
        if self.numeric_partials {
            let h = self.fd_step;
            Ok((self.eval_f(t, y, v + h)? - self.eval_f(t, y, v - h)?) / (2.0 * h))
        } else {
            self.fv.eval(&[("t", t), ("y", y), ("v", v)])
        }
    }
}

/// The outer map H(z1, …, zn) with its symbolic gradient, plus the list of
/// integrands it composes.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeFunctional {
    h: Expr,
    h_grad: Vec<Expr>,
    integrands: Vec<Integrand>,
    z_names: Vec<String>,
}

impl CompositeFunctional {
    pub fn new(h: Expr, integrands: Vec<Integrand>) -> Result<Self> {
        if integrands.is_empty() {
            return Err(Error::InvalidProblem(
                "a composite functional needs at least one integrand".into(),
            ));
        }
        let z_names: Vec<String> = (1..=integrands.len()).map(|i| format!("z{i}")).collect();
        for v in h.variables() {
            if !z_names.contains(&v) {
                return Err(Error::InvalidProblem(format!(
                    "H = `{h}` uses `{v}` but there are {} integrands (z1..z{})",
                    integrands.len(),
                    integrands.len()
                )));
            }
        }
        let h_grad = z_names.iter().map(|z| h.differentiate(z)).collect();
        Ok(CompositeFunctional {
            h,
            h_grad,
            integrands,
            z_names,
        })
    }

    pub fn parse(h_text: &str, integrand_texts: &[&str]) -> Result<Self> {
        let z_names: Vec<String> = (1..=integrand_texts.len())
            .map(|i| format!("z{i}"))
            .collect();
        let z_refs: Vec<&str> = z_names.iter().map(|s| s.as_str()).collect();
        let h = parse(h_text, &z_refs)?;
        let integrands = integrand_texts
            .iter()
            .map(|t| Integrand::parse(t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(h, integrands)
    }

    /// The product functional H = z1 * z2.
    pub fn product(f1: Integrand, f2: Integrand) -> Self {
        let h = Expr::Mul(Box::new(Expr::var("z1")), Box::new(Expr::var("z2")));
        Self::new(h, vec![f1, f2]).unwrap()
    }

    /// The quotient functional H = z1 / z2.
    pub fn quotient(f1: Integrand, f2: Integrand) -> Self {
        let h = Expr::Div(Box::new(Expr::var("z1")), Box::new(Expr::var("z2")));
        Self::new(h, vec![f1, f2]).unwrap()
    }

    pub fn n(&self) -> usize {
        self.integrands.len()
    }

    pub fn h(&self) -> &Expr {
        &self.h
    }

    pub fn h_grad(&self) -> &[Expr] {
        &self.h_grad
    }

    pub fn integrands(&self) -> &[Integrand] {
        &self.integrands
    }

    fn z_env<'a>(&'a self, f_values: &[f64]) -> Vec<(&'a str, f64)> {
        self.z_names
            .iter()
            .map(|s| s.as_str())
            .zip(f_values.iter().copied())
            .collect()
    }

    pub fn eval_h(&self, f_values: &[f64]) -> Result<f64> {
        self.h.eval(&self.z_env(f_values)).map_err(|e| match e {
            Error::EvalDomain { expr, reason } => Error::EvalDomain {
                expr,
                reason: format!("{reason} (component values {f_values:?})"),
            },
            other => other,
        })
    }

    pub fn eval_h_grad(&self, f_values: &[f64]) -> Result<Vec<f64>> {
        let env = self.z_env(f_values);
        self.h_grad.iter().map(|g| g.eval(&env)).collect()
    }
}

/// End-point condition of the problem: pinned to a value or left free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    Fixed(f64),
    Free,
}

impl BoundaryCondition {
    pub fn is_free(&self) -> bool {
        matches!(self, BoundaryCondition::Free)
    }
}

/// A variational problem: functional, interval [a, b] inside the scale,
/// and one boundary condition per endpoint.
#[derive(Debug, Clone)]
pub struct VariationalProblem {
    scale: Arc<TimeScale>,
    ia: usize,
    ib: usize,
    functional: CompositeFunctional,
    left_bc: BoundaryCondition,
    right_bc: BoundaryCondition,
}

impl VariationalProblem {
    pub fn new(
        scale: Arc<TimeScale>,
        a: f64,
        b: f64,
        functional: CompositeFunctional,
        left_bc: BoundaryCondition,
        right_bc: BoundaryCondition,
    ) -> Result<Self> {
        let ia = scale.locate(a)?;
        let ib = scale.locate(b)?;
        if ia >= ib {
            return Err(Error::IntervalOrder {
                a: scale.points()[ia],
                b: scale.points()[ib],
            });
        }
        // free endpoints need the ambient scale to extend strictly past
        // the interval, mirroring the A < a, b < B setup
        if (left_bc.is_free() || right_bc.is_free()) && (ia == 0 || ib == scale.len() - 1) {
            return Err(Error::InvalidProblem(
                "a problem with a free boundary needs min(scale) < a and b < max(scale)".into(),
            ));
        }
        for bc in [&left_bc, &right_bc] {
            if let BoundaryCondition::Fixed(v) = bc {
                if !v.is_finite() {
                    return Err(Error::InvalidProblem(
                        "fixed boundary values must be finite".into(),
                    ));
                }
            }
        }
        Ok(VariationalProblem {
            scale,
            ia,
            ib,
            functional,
            left_bc,
            right_bc,
        })
    }

    pub fn scale(&self) -> &Arc<TimeScale> {
        &self.scale
    }

    pub fn a(&self) -> f64 {
        self.scale.points()[self.ia]
    }

    pub fn b(&self) -> f64 {
        self.scale.points()[self.ib]
    }

    pub fn a_index(&self) -> usize {
        self.ia
    }

    pub fn b_index(&self) -> usize {
        self.ib
    }

    pub fn functional(&self) -> &CompositeFunctional {
        &self.functional
    }

    pub fn left_bc(&self) -> BoundaryCondition {
        self.left_bc
    }

    pub fn right_bc(&self) -> BoundaryCondition {
        self.right_bc
    }

    /// Indices of the values a solver may move: interior points of (a, b)
    /// plus each endpoint whose condition is free.
    pub fn free_indices(&self) -> Vec<usize> {
        let mut idx = Vec::new();
        if self.left_bc.is_free() {
            idx.push(self.ia);
        }
        idx.extend(self.ia + 1..self.ib);
        if self.right_bc.is_free() {
            idx.push(self.ib);
        }
        idx.sort_unstable();
        idx
    }

    pub(crate) fn check_candidate(&self, x: &GridFunction) -> Result<()> {
        if x.scale().points() != self.scale.points() {
            return Err(Error::InvalidGridFunction(
                "candidate is defined on a different time scale".into(),
            ));
        }
        if let BoundaryCondition::Fixed(v) = self.left_bc {
            let got = x.values()[self.ia];
            if (got - v).abs() > BC_RTOL * v.abs().max(1.0) {
                return Err(Error::BcViolation(format!(
                    "x(a) = {got} but the left boundary requires {v}"
                )));
            }
        }
        if let BoundaryCondition::Fixed(v) = self.right_bc {
            let got = x.values()[self.ib];
            if (got - v).abs() > BC_RTOL * v.abs().max(1.0) {
                return Err(Error::BcViolation(format!(
                    "x(b) = {got} but the right boundary requires {v}"
                )));
            }
        }
        Ok(())
    }
}

/// The composed trajectory data on (a, b]: at each point t_k the triple
/// (t_k, x^ρ(t_k), x^∇(t_k)) together with ν(t_k).
pub(crate) struct Composed {
    pub ts: Vec<f64>,
    pub nus: Vec<f64>,
    pub ys: Vec<f64>,
    pub vs: Vec<f64>,
}

pub(crate) fn composed(p: &VariationalProblem, x: &GridFunction) -> Result<Composed> {
    p.check_candidate(x)?;
    let pts = p.scale.points();
    let xv = x.values();
    let m = p.ib - p.ia;
    let mut ts = Vec::with_capacity(m);
    let mut nus = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    let mut vs = Vec::with_capacity(m);
    for k in p.ia + 1..=p.ib {
        let nu = pts[k] - pts[k - 1];
        ts.push(pts[k]);
        nus.push(nu);
        ys.push(xv[k - 1]);
        vs.push((xv[k] - xv[k - 1]) / nu);
    }
    Ok(Composed { ts, nus, ys, vs })
}

/// Component values Fᵢ = ∫_a^b fᵢ(t, x^ρ, x^∇) ∇t.
pub fn eval_components(p: &VariationalProblem, x: &GridFunction) -> Result<Vec<f64>> {
    let c = composed(p, x)?;
    components_from(&c, p.functional())
}

pub(crate) fn components_from(c: &Composed, functional: &CompositeFunctional) -> Result<Vec<f64>> {
    functional
        .integrands()
        .iter()
        .map(|fi| {
            let mut acc = CompensatedSum::new();
            for k in 0..c.ts.len() {
                acc.add(c.nus[k] * fi.eval_f(c.ts[k], c.ys[k], c.vs[k])?);
            }
            Ok(acc.value())
        })
        .collect()
}

/// The full functional value H(F₁, …, Fₙ).
pub fn eval_functional(p: &VariationalProblem, x: &GridFunction) -> Result<f64> {
    let f_values = eval_components(p, x)?;
    p.functional().eval_h(&f_values)
}

/// Euler-Lagrange and natural-boundary residuals of a candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct ELReport {
    /// the points where the Euler-Lagrange equation is asserted
    pub points: Vec<f64>,
    pub residuals: Vec<f64>,
    pub f_values: Vec<f64>,
    pub h_grad: Vec<f64>,
    /// present iff the left boundary is free
    pub left_bc_residual: Option<f64>,
    /// present iff the right boundary is free
    pub right_bc_residual: Option<f64>,
}

impl ELReport {
    /// Largest magnitude over the Euler-Lagrange residuals and whichever
    /// natural-boundary residuals apply.
    pub fn max_abs_residual(&self) -> f64 {
        let mut m = self
            .residuals
            .iter()
            .fold(0.0_f64, |acc, r| acc.max(r.abs()));
        if let Some(r) = self.left_bc_residual {
            m = m.max(r.abs());
        }
        if let Some(r) = self.right_bc_residual {
            m = m.max(r.abs());
        }
        m
    }
}

/// Per-integrand Euler-Lagrange pieces rᵢ(t) = (f_iv)^∇(t) − f_iy(t) on the
/// assertion set, before weighting by H'ᵢ. Returns the points and one
/// residual row per integrand.
pub fn per_integrand_el_residuals(
    p: &VariationalProblem,
    x: &GridFunction,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let c = composed(p, x)?;
    per_integrand_from(&c, p.functional())
}

pub(crate) fn per_integrand_from(
    c: &Composed,
    functional: &CompositeFunctional,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = c.ts.len();
    let points = c.ts[1..].to_vec();
    let mut rows = Vec::with_capacity(functional.n());
    for fi in functional.integrands() {
        let fv: Vec<f64> = (0..m)
            .map(|k| fi.eval_fv(c.ts[k], c.ys[k], c.vs[k]))
            .collect::<Result<_>>()?;
        let mut row = Vec::with_capacity(m.saturating_sub(1));
        for k in 1..m {
            let dfv = (fv[k] - fv[k - 1]) / c.nus[k];
            let fy = fi.eval_fy(c.ts[k], c.ys[k], c.vs[k])?;
            row.push(dfv - fy);
        }
        rows.push(row);
    }
    Ok((points, rows))
}

/// Euler-Lagrange residual report for a candidate trajectory.
pub fn el_residual(p: &VariationalProblem, x: &GridFunction) -> Result<ELReport> {
    let c = composed(p, x)?;
    let f_values = components_from(&c, p.functional())?;
    let h_grad = p.functional().eval_h_grad(&f_values)?;
    let (points, rows) = per_integrand_from(&c, p.functional())?;
    let mut residuals = vec![0.0; points.len()];
    for (gi, row) in h_grad.iter().zip(&rows) {
        for (r, piece) in residuals.iter_mut().zip(row) {
            *r += gi * piece;
        }
    }
    let left_bc_residual = if p.left_bc().is_free() {
        Some(natural_bc_left_from(&c, p.functional(), &h_grad)?)
    } else {
        None
    };
    let right_bc_residual = if p.right_bc().is_free() {
        Some(natural_bc_right_from(&c, p.functional(), &h_grad)?)
    } else {
        None
    };
    Ok(ELReport {
        points,
        residuals,
        f_values,
        h_grad,
        left_bc_residual,
        right_bc_residual,
    })
}

/// Per-integrand left-boundary pieces
/// ∫_a^{σ(a)} f_iy ∇t − f_iv(σ(a), x^ρ(σ(a)), x^∇(σ(a))); the integral over
/// (a, σ(a)] is the single term μ(a)·f_iy(σ(a), …) on an isolated scale.
fn left_bc_pieces(c: &Composed, functional: &CompositeFunctional) -> Result<Vec<f64>> {
    functional
        .integrands()
        .iter()
        .map(|fi| {
            let fy = fi.eval_fy(c.ts[0], c.ys[0], c.vs[0])?;
            let fv = fi.eval_fv(c.ts[0], c.ys[0], c.vs[0])?;
            Ok(c.nus[0] * fy - fv)
        })
        .collect()
}

/// Per-integrand right-boundary pieces f_iv(b, x^ρ(b), x^∇(b)).
fn right_bc_pieces(c: &Composed, functional: &CompositeFunctional) -> Result<Vec<f64>> {
    let last = c.ts.len() - 1;
    functional
        .integrands()
        .iter()
        .map(|fi| fi.eval_fv(c.ts[last], c.ys[last], c.vs[last]))
        .collect()
}

fn natural_bc_left_from(
    c: &Composed,
    functional: &CompositeFunctional,
    h_grad: &[f64],
) -> Result<f64> {
    let pieces = left_bc_pieces(c, functional)?;
    Ok(h_grad.iter().zip(&pieces).map(|(g, p)| g * p).sum())
}

fn natural_bc_right_from(
    c: &Composed,
    functional: &CompositeFunctional,
    h_grad: &[f64],
) -> Result<f64> {
    let pieces = right_bc_pieces(c, functional)?;
    Ok(h_grad.iter().zip(&pieces).map(|(g, p)| g * p).sum())
}

/// Natural boundary residual at the free left endpoint.
pub fn natural_bc_left(p: &VariationalProblem, x: &GridFunction) -> Result<f64> {
    if !p.left_bc().is_free() {
        return Err(Error::Usage(
            "natural_bc_left applies only when the left boundary is free".into(),
        ));
    }
    let c = composed(p, x)?;
    let f_values = components_from(&c, p.functional())?;
    let h_grad = p.functional().eval_h_grad(&f_values)?;
    natural_bc_left_from(&c, p.functional(), &h_grad)
}

/// Natural boundary residual at the free right endpoint.
pub fn natural_bc_right(p: &VariationalProblem, x: &GridFunction) -> Result<f64> {
    if !p.right_bc().is_free() {
        return Err(Error::Usage(
            "natural_bc_right applies only when the right boundary is free".into(),
        ));
    }
    let c = composed(p, x)?;
    let f_values = components_from(&c, p.functional())?;
    let h_grad = p.functional().eval_h_grad(&f_values)?;
    natural_bc_right_from(&c, p.functional(), &h_grad)
}

/// Residuals computed along the two-integrand corollary routes instead of
/// the general formula. For the product these equal the general residuals;
/// for the quotient they equal F₂ times the general residuals (the
/// corollary clears the 1/F₂ factor carried by H'₁ = 1/z₂).
#[derive(Debug, Clone, PartialEq)]
pub struct CorollaryResiduals {
    pub points: Vec<f64>,
    pub residuals: Vec<f64>,
    pub f_values: Vec<f64>,
    pub left_bc_residual: Option<f64>,
    pub right_bc_residual: Option<f64>,
}

/// F₂·EL₁ + F₁·EL₂ route for a two-integrand product problem.
pub fn product_corollary(p: &VariationalProblem, x: &GridFunction) -> Result<CorollaryResiduals> {
    let (c, f_values, points, rows) = two_integrand_parts(p, x)?;
    let residuals = points
        .iter()
        .enumerate()
        .map(|(k, _)| f_values[1] * rows[0][k] + f_values[0] * rows[1][k])
        .collect();
    let func = p.functional();
    let left_bc_residual = if p.left_bc().is_free() {
        let pieces = left_bc_pieces(&c, func)?;
        Some(f_values[1] * pieces[0] + f_values[0] * pieces[1])
    } else {
        None
    };
    let right_bc_residual = if p.right_bc().is_free() {
        let pieces = right_bc_pieces(&c, func)?;
        Some(f_values[1] * pieces[0] + f_values[0] * pieces[1])
    } else {
        None
    };
    Ok(CorollaryResiduals {
        points,
        residuals,
        f_values,
        left_bc_residual,
        right_bc_residual,
    })
}

/// EL₁ − Q·EL₂ route, Q = F₁/F₂, for a two-integrand quotient problem.
pub fn quotient_corollary(p: &VariationalProblem, x: &GridFunction) -> Result<CorollaryResiduals> {
    let (c, f_values, points, rows) = two_integrand_parts(p, x)?;
    if f_values[1] == 0.0 {
        return Err(Error::EvalDomain {
            expr: "z1 / z2".into(),
            reason: format!("F2 = 0 at this candidate (component values {f_values:?})"),
        });
    }
    let q = f_values[0] / f_values[1];
    let residuals = points
        .iter()
        .enumerate()
        .map(|(k, _)| rows[0][k] - q * rows[1][k])
        .collect();
    let func = p.functional();
    let left_bc_residual = if p.left_bc().is_free() {
        let pieces = left_bc_pieces(&c, func)?;
        Some(pieces[0] - q * pieces[1])
    } else {
        None
    };
    let right_bc_residual = if p.right_bc().is_free() {
        let pieces = right_bc_pieces(&c, func)?;
        Some(pieces[0] - q * pieces[1])
    } else {
        None
    };
    Ok(CorollaryResiduals {
        points,
        residuals,
        f_values,
        left_bc_residual,
        right_bc_residual,
    })
}

#[allow(clippy::type_complexity)]
fn two_integrand_parts(
    p: &VariationalProblem,
    x: &GridFunction,
) -> Result<(Composed, Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    if p.functional().n() != 2 {
        return Err(Error::Usage(
            "the corollary routes apply to two-integrand functionals".into(),
        ));
    }
    let c = composed(p, x)?;
    let f_values = components_from(&c, p.functional())?;
    let (points, rows) = per_integrand_from(&c, p.functional())?;
    Ok((c, f_values, points, rows))
}
