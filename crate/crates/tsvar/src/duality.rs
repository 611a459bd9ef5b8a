//! The delta/nabla duality machinery: dual time scale, dual function, dual
//! Lagrangian, and executable checks of the duality identities.
//!
//! Dualization negates the scale, T* = {−s : s ∈ T}, and transports
//! functions by f*(s) = f(−s). Derivatives swap flavour with a sign,
//! integrals swap flavour exactly, and a nabla Lagrangian functional
//! becomes a delta one on the dual scale via L*(s, x, v) = L(−s, x, −v).
//! These checks are first-class operations (not test-only code) so the
//! command line can run and report them.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::{CompensatedSum, GridFunction};
use crate::error::Result;
use crate::expr::{random::smooth_expr, Expr};
use crate::timescale::{Provenance, TimeScale};
use crate::variational::Integrand;

/// A scale together with its dual. Dualizing twice restores the original
/// points bit for bit.
#[derive(Debug, Clone)]
pub struct DualPair {
    pub original: Arc<TimeScale>,
    pub dual: Arc<TimeScale>,
}

impl DualPair {
    pub fn new(original: Arc<TimeScale>) -> Self {
        let dual = Arc::new(dual_timescale(&original));
        DualPair { original, dual }
    }

    /// Checks dual.points[i] == −original.points[last − i] and the exact
    /// round trip, both bitwise.
    pub fn involution_exact(&self) -> bool {
        let orig = self.original.points();
        let dual = self.dual.points();
        let n = orig.len();
        let mirrored = (0..n).all(|i| dual[i].to_bits() == (-orig[n - 1 - i]).to_bits());
        let back = dual_timescale(&self.dual);
        let restored = back
            .points()
            .iter()
            .zip(orig)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        mirrored && restored
    }
}

/// The dual time scale T* = {−s : s ∈ T}. A uniform grid stays uniform on
/// the negated interval; other provenances dualize to explicit point lists.
pub fn dual_timescale(ts: &TimeScale) -> TimeScale {
    let mut points: Vec<f64> = ts.points().iter().map(|&p| -p).collect();
    points.reverse();
    let provenance = match ts.provenance() {
        Provenance::Uniform { a, b, n } => Provenance::Uniform {
            a: -b,
            b: -a,
            n: *n,
        },
        _ => Provenance::Explicit,
    };
    TimeScale::from_points(points, provenance).expect("negating a valid scale keeps it valid")
}

/// The dual function f*(s) = f(−s) on the dual scale.
pub fn dual_function(f: &GridFunction) -> GridFunction {
    let dual_scale = Arc::new(dual_timescale(f.scale()));
    let mut values = f.values().to_vec();
    values.reverse();
    GridFunction::from_values(dual_scale, values).expect("reversed values fit the dual scale")
}

/// The dual Lagrangian L*(s, x, v) = L(−s, x, −v), with partials
/// regenerated from the substituted expression.
pub fn dual_lagrangian(l: &Integrand) -> Result<Integrand> {
    let f = l
        .f()
        .substitute("t", &Expr::Neg(Box::new(Expr::var("t"))))
        .substitute("v", &Expr::Neg(Box::new(Expr::var("v"))));
    if l.uses_numeric_partials() {
        Integrand::with_numeric_partials(f, 1e-6)
    } else {
        Integrand::new(f)
    }
}

/// Outcome of checking f^Δ(t) = −(f*)^∇̂(−t) on T^κ and
/// f^∇(t) = −(f*)^Δ̂(−t) on T_κ.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeDualityReport {
    pub checked_points: usize,
    pub max_discrepancy: f64,
}

pub fn check_derivative_duality(f: &GridFunction) -> DerivativeDualityReport {
    let fd = dual_function(f);
    let n = f.scale().len();
    let pts = f.scale().points();
    let dpts = fd.scale().points();
    let fv = f.values();
    let dv = fd.values();
    let mut max = 0.0_f64;
    // delta on T vs nabla on T*: t_i pairs with dual index n−1−i
    for i in 0..n - 1 {
        let delta = (fv[i + 1] - fv[i]) / (pts[i + 1] - pts[i]);
        let j = n - 1 - i;
        let nabla_dual = (dv[j] - dv[j - 1]) / (dpts[j] - dpts[j - 1]);
        max = max.max((delta + nabla_dual).abs());
    }
    // nabla on T vs delta on T*
    for i in 1..n {
        let nabla = (fv[i] - fv[i - 1]) / (pts[i] - pts[i - 1]);
        let j = n - 1 - i;
        let delta_dual = (dv[j + 1] - dv[j]) / (dpts[j + 1] - dpts[j]);
        max = max.max((nabla + delta_dual).abs());
    }
    DerivativeDualityReport {
        checked_points: 2 * (n - 1),
        max_discrepancy: max,
    }
}

/// Outcome of checking ∫_a^b f Δt = ∫_{−b}^{−a} f* ∇̂s and its mirror.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralDualityReport {
    pub delta_integral: f64,
    pub dual_nabla_integral: f64,
    pub nabla_integral: f64,
    pub dual_delta_integral: f64,
    pub max_discrepancy: f64,
}

pub fn check_integral_duality(f: &GridFunction, a: f64, b: f64) -> Result<IntegralDualityReport> {
    let fd = dual_function(f);
    let delta = crate::calculus::delta_integral(f, a, b)?;
    let dual_nabla = crate::calculus::nabla_integral(&fd, -b, -a)?;
    let nabla = crate::calculus::nabla_integral(f, a, b)?;
    let dual_delta = crate::calculus::delta_integral(&fd, -b, -a)?;
    let max_discrepancy = (delta - dual_nabla).abs().max((nabla - dual_delta).abs());
    Ok(IntegralDualityReport {
        delta_integral: delta,
        dual_nabla_integral: dual_nabla,
        nabla_integral: nabla,
        dual_delta_integral: dual_delta,
        max_discrepancy,
    })
}

/// Both sides of the dual-Lagrangian identity
/// ∫_a^b L(t, x^ρ, x^∇) ∇t = ∫_{−b}^{−a} L*(s, (x*)^σ̂, (x*)^Δ̂) Δ̂s.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianDualityReport {
    pub nabla_value: f64,
    pub dual_delta_value: f64,
    pub relative_discrepancy: f64,
}

pub fn check_lagrangian_duality(
    l: &Integrand,
    x: &GridFunction,
    a: f64,
    b: f64,
) -> Result<LagrangianDualityReport> {
    let ia = x.scale().locate(a)?;
    let ib = x.scale().locate(b)?;
    let pts = x.scale().points();
    let xv = x.values();

    let mut lhs = CompensatedSum::new();
    for k in ia + 1..=ib {
        let nu = pts[k] - pts[k - 1];
        let v = (xv[k] - xv[k - 1]) / nu;
        lhs.add(nu * l.eval_f(pts[k], xv[k - 1], v)?);
    }

    let ld = dual_lagrangian(l)?;
    let xd = dual_function(x);
    let dpts = xd.scale().points();
    let dxv = xd.values();
    let n = dpts.len();
    let ja = n - 1 - ib;
    let jb = n - 1 - ia;
    let mut rhs = CompensatedSum::new();
    for j in ja..jb {
        let mu = dpts[j + 1] - dpts[j];
        let w = (dxv[j + 1] - dxv[j]) / mu;
        // (x*)^σ̂(s_j) is the value at the next dual point
        rhs.add(mu * ld.eval_f(dpts[j], dxv[j + 1], w)?);
    }

    let (lv, rv) = (lhs.value(), rhs.value());
    let relative_discrepancy = (lv - rv).abs() / lv.abs().max(rv.abs()).max(1.0);
    Ok(LagrangianDualityReport {
        nabla_value: lv,
        dual_delta_value: rv,
        relative_discrepancy,
    })
}

/// Per-integrand Euler-Lagrange duality: the nabla residual
/// (L_v)^∇(t) − L_y(t) of x on [a, b] equals the delta residual of the
/// dualized data at −t. Returns the assertion points (on the original
/// scale) and the largest absolute difference.
pub fn check_el_residual_duality(
    l: &Integrand,
    x: &GridFunction,
    a: f64,
    b: f64,
) -> Result<(Vec<f64>, f64)> {
    let ia = x.scale().locate(a)?;
    let ib = x.scale().locate(b)?;
    let pts = x.scale().points();
    let xv = x.values();

    // nabla side on (a, b], residual on its tail
    let m = ib - ia;
    let mut gv = Vec::with_capacity(m);
    let mut gy = Vec::with_capacity(m);
    for k in ia + 1..=ib {
        let nu = pts[k] - pts[k - 1];
        let v = (xv[k] - xv[k - 1]) / nu;
        gv.push(l.eval_fv(pts[k], xv[k - 1], v)?);
        gy.push(l.eval_fy(pts[k], xv[k - 1], v)?);
    }
    let mut nabla_res = Vec::with_capacity(m.saturating_sub(1));
    let mut points = Vec::with_capacity(m.saturating_sub(1));
    for k in 1..m {
        let nu = pts[ia + k + 1] - pts[ia + k];
        nabla_res.push((gv[k] - gv[k - 1]) / nu - gy[k]);
        points.push(pts[ia + k + 1]);
    }

    // delta side of the dual problem on [−b, −a)
    let ld = dual_lagrangian(l)?;
    let xd = dual_function(x);
    let dpts = xd.scale().points();
    let dxv = xd.values();
    let n = dpts.len();
    let ja = n - 1 - ib;
    let jb = n - 1 - ia;
    let mut hv = Vec::with_capacity(m);
    let mut hy = Vec::with_capacity(m);
    for j in ja..jb {
        let mu = dpts[j + 1] - dpts[j];
        let w = (dxv[j + 1] - dxv[j]) / mu;
        hv.push(ld.eval_fv(dpts[j], dxv[j + 1], w)?);
        hy.push(ld.eval_fy(dpts[j], dxv[j + 1], w)?);
    }
    let mut max = 0.0_f64;
    for (idx, k) in (1..m).enumerate() {
        // nabla point t_{ia+k+1} pairs with dual offset j = jb − 1 − k… in
        // local offsets: dual slot (m − 1 − k) asserts at −t_{ia+k+1}
        let off = m - 1 - k;
        let mu = dpts[ja + off + 1] - dpts[ja + off];
        let delta_res = (hv[off + 1] - hv[off]) / mu - hy[off];
        max = max.max((nabla_res[idx] - delta_res).abs());
    }
    Ok((points, max))
}

/// Aggregate result of the randomized duality suite.
#[derive(Debug, Clone, PartialEq)]
pub struct DualitySuiteReport {
    pub cases: usize,
    pub involution_failures: usize,
    pub max_derivative_discrepancy: f64,
    pub max_integral_discrepancy: f64,
    pub max_lagrangian_relative: f64,
    pub max_el_residual_discrepancy: f64,
}

impl DualitySuiteReport {
    /// Pass/fail against the standing tolerances: 1e−12 absolute for the
    /// derivative and integral identities, 1e−10 for the Lagrangian
    /// identity (relative) and the Euler-Lagrange transfer, involution
    /// exact.
    pub fn pass(&self) -> bool {
        self.involution_failures == 0
            && self.max_derivative_discrepancy <= 1e-12
            && self.max_integral_discrepancy <= 1e-12
            && self.max_lagrangian_relative <= 1e-10
            && self.max_el_residual_discrepancy <= 1e-10
    }
}

/// Runs `cases` randomized (scale, function, Lagrangian) triples through
/// every duality check. Deterministic per seed.
pub fn run_random_suite(cases: usize, seed: u64) -> DualitySuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = DualitySuiteReport {
        cases,
        involution_failures: 0,
        max_derivative_discrepancy: 0.0,
        max_integral_discrepancy: 0.0,
        max_lagrangian_relative: 0.0,
        max_el_residual_discrepancy: 0.0,
    };
    for _ in 0..cases {
        let ts = crate::random::scale(&mut rng);
        let f = crate::random::grid_function(&mut rng, &ts);

        if !DualPair::new(Arc::clone(&ts)).involution_exact() {
            report.involution_failures += 1;
        }
        let df = dual_function(&dual_function(&f));
        if df
            .values()
            .iter()
            .zip(f.values())
            .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            report.involution_failures += 1;
        }

        let d = check_derivative_duality(&f);
        report.max_derivative_discrepancy =
            report.max_derivative_discrepancy.max(d.max_discrepancy);

        let pts = ts.points();
        let ia = rng.gen_range(0..pts.len() - 1);
        let ib = rng.gen_range(ia + 1..pts.len());
        let i = check_integral_duality(&f, pts[ia], pts[ib]).expect("endpoints are scale points");
        report.max_integral_discrepancy = report.max_integral_discrepancy.max(i.max_discrepancy);

        let lagrangian =
            Integrand::new(smooth_expr(&mut rng, &["t", "y", "v"], 3)).expect("vars are t,y,v");
        let x = crate::random::grid_function(&mut rng, &ts);
        let l = check_lagrangian_duality(&lagrangian, &x, pts[ia], pts[ib])
            .expect("smooth Lagrangians evaluate everywhere");
        report.max_lagrangian_relative = report.max_lagrangian_relative.max(l.relative_discrepancy);

        if ib - ia >= 2 {
            let (_, el) = check_el_residual_duality(&lagrangian, &x, pts[ia], pts[ib])
                .expect("smooth Lagrangians evaluate everywhere");
            report.max_el_residual_discrepancy = report.max_el_residual_discrepancy.max(el);
        }
    }
    report
}
