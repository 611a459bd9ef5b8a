//! Finite time scales: jump operators, graininess, and the κ-trimmed sets.
//!
//! A time scale here is a strictly increasing finite set of reals. On such a
//! scale every interior point is isolated, so the jump operators are plain
//! neighbour lookups and the graininess functions are the gaps. "Continuous"
//! problems are represented by uniform grids and carry first-order
//! discretization error; everything on a genuinely isolated scale is exact.

use crate::error::{Error, Result};

/// Relative tolerance used to snap user-supplied coordinates onto stored
/// points. Inputs further away than this are rejected rather than rounded.
pub const SNAP_RTOL: f64 = 1e-12;

/// How a [`TimeScale`] was built. The dual of a uniform grid stays uniform;
/// everything else dualizes to an explicit point list.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// Hand-listed points.
    Explicit,
    /// `n + 1` equally spaced points on `[a, b]`.
    Uniform { a: f64, b: f64, n: usize },
    /// Powers `q^k` (integer `k`, `q > 1`) intersected with `[a, b]`.
    QScale { q: f64, a: f64, b: f64 },
}

/// A finite time scale: at least two strictly increasing points.
///
/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeScale {
    points: Vec<f64>,
    provenance: Provenance,
}

/// Scatteredness flags of one point, derived from the jump operators.
///
/// On a finite scale every interior point is isolated; the minimum is
/// left-dense only in the conventional sense ρ(min) = min, and likewise
/// the maximum is right-dense by the convention σ(max) = max.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointClass {
    pub left_scattered: bool,
    pub left_dense: bool,
    pub right_scattered: bool,
    pub right_dense: bool,
    pub isolated: bool,
    pub dense: bool,
}

impl std::fmt::Display for PointClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.isolated {
            return write!(f, "isolated");
        }
        if self.dense {
            return write!(f, "dense");
        }
        let mut parts = Vec::new();
        if self.left_scattered {
            parts.push("left-scattered");
        }
        if self.left_dense {
            parts.push("left-dense");
        }
        if self.right_scattered {
            parts.push("right-scattered");
        }
        if self.right_dense {
            parts.push("right-dense");
        }
        write!(f, "{}", parts.join(", "))
    }
}

impl TimeScale {
    /// Builds a scale from an explicit point list.
    pub fn explicit(points: &[f64]) -> Result<Self> {
        Self::from_points(points.to_vec(), Provenance::Explicit)
    }

    /// Builds the uniform grid of `n + 1` points on `[a, b]`.
    ///
    /// The last point is pinned to `b` exactly so the gaps are constant up
    /// to one rounding unit.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::InvalidScale(format!(
                "uniform grid needs finite a < b, got [{a}, {b}]"
            )));
        }
        if n < 1 {
            return Err(Error::InvalidScale(
                "uniform grid needs at least one interval".into(),
            ));
        }
        let mut points = Vec::with_capacity(n + 1);
        for k in 0..=n {
            points.push(a + (k as f64) * (b - a) / (n as f64));
        }
        points[n] = b;
        Self::from_points(points, Provenance::Uniform { a, b, n })
    }

    /// Builds the q-scale `{q^k : k ∈ ℤ} ∩ [a, b]` for `q > 1`.
    ///
    /// Powers are generated descending from the largest `q^k ≤ b` until they
    /// drop below `a`; the interval must contain at least two of them.
    pub fn q_scale(q: f64, a: f64, b: f64) -> Result<Self> {
        if !(q.is_finite() && q > 1.0) {
            return Err(Error::InvalidScale(format!("q-scale needs q > 1, got {q}")));
        }
        if !(a.is_finite() && b.is_finite()) || a <= 0.0 || a >= b {
            return Err(Error::InvalidScale(format!(
                "q-scale needs 0 < a < b, got [{a}, {b}]"
            )));
        }
        let k_max = (b.ln() / q.ln()).floor() as i32;
        let mut points = Vec::new();
        let mut k = k_max;
        loop {
            let p = q.powi(k);
            if p < a {
                break;
            }
            if p <= b {
                points.push(p);
            }
            k -= 1;
        }
        points.reverse();
        Self::from_points(points, Provenance::QScale { q, a, b })
    }

    pub(crate) fn from_points(points: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidScale(format!(
                "a time scale needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidScale("points must be finite".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScale(
                "points must be strictly increasing with no duplicates".into(),
            ));
        }
        Ok(TimeScale { points, provenance })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Index of the stored point matching `t`, snapping within [`SNAP_RTOL`]
    /// relative tolerance. Anything further off is a domain error.
    pub fn locate(&self, t: f64) -> Result<usize> {
        let i = match self.points.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => return Ok(i),
            Err(i) => i,
        };
        // nearest of the two neighbours of the insertion slot
        let mut best = None;
        for j in [i.wrapping_sub(1), i] {
            if let Some(&p) = self.points.get(j) {
                let d = (p - t).abs();
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        let (j, d) = best.unwrap();
        let p = self.points[j];
        if d <= SNAP_RTOL * p.abs().max(1.0) {
            Ok(j)
        } else {
            Err(Error::PointNotInScale { t, nearest: p })
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.locate(t).is_ok()
    }

    /// Forward jump operator σ: next point, clamped at the maximum.
    pub fn sigma(&self, t: f64) -> Result<f64> {
        let i = self.locate(t)?;
        Ok(self.points[(i + 1).min(self.points.len() - 1)])
    }

    /// Backward jump operator ρ: previous point, clamped at the minimum.
    pub fn rho(&self, t: f64) -> Result<f64> {
        let i = self.locate(t)?;
        Ok(self.points[i.saturating_sub(1)])
    }

    /// Forward graininess μ(t) = σ(t) − t.
    pub fn mu(&self, t: f64) -> Result<f64> {
        let i = self.locate(t)?;
        Ok(self.mu_at(i))
    }

    /// Backward graininess ν(t) = t − ρ(t).
    pub fn nu(&self, t: f64) -> Result<f64> {
        let i = self.locate(t)?;
        Ok(self.nu_at(i))
    }

    pub(crate) fn sigma_at(&self, i: usize) -> f64 {
        self.points[(i + 1).min(self.points.len() - 1)]
    }

    pub(crate) fn rho_at(&self, i: usize) -> f64 {
        self.points[i.saturating_sub(1)]
    }

    pub(crate) fn mu_at(&self, i: usize) -> f64 {
        self.sigma_at(i) - self.points[i]
    }

    pub(crate) fn nu_at(&self, i: usize) -> f64 {
        self.points[i] - self.rho_at(i)
    }

    /// T^κ: the scale without its (left-scattered) maximum.
    pub fn kappa_upper(&self) -> &[f64] {
        &self.points[..self.points.len() - 1]
    }

    /// T_κ: the scale without its (right-scattered) minimum.
    pub fn kappa_lower(&self) -> &[f64] {
        &self.points[1..]
    }

    /// Scatteredness flags of `t`, consistent with σ and ρ.
    pub fn classify(&self, t: f64) -> Result<PointClass> {
        let i = self.locate(t)?;
        let p = self.points[i];
        let left_scattered = self.rho_at(i) < p;
        let right_scattered = self.sigma_at(i) > p;
        let left_dense = !left_scattered;
        let right_dense = !right_scattered;
        Ok(PointClass {
            left_scattered,
            left_dense,
            right_scattered,
            right_dense,
            isolated: left_scattered && right_scattered,
            dense: left_dense && right_dense,
        })
    }
}
