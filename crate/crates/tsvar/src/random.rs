//! Seeded random scales and grid functions for the property suites.
//!
//! Gaps are bounded below so difference quotients stay well scaled, and
//! values live in [−2, 2]; the absolute tolerances of the duality checks
//! assume inputs of this size.

use std::sync::Arc;

use rand::Rng;

use crate::calculus::GridFunction;
use crate::timescale::TimeScale;

/// Random explicit scale: `len` points in `[lo, hi]` with gaps ≥ `min_gap`.
pub fn explicit_scale(rng: &mut impl Rng, len: usize, lo: f64, hi: f64, min_gap: f64) -> TimeScale {
    assert!(len >= 2);
    let span = hi - lo - min_gap * (len - 1) as f64;
    assert!(
        span > 0.0,
        "interval too small for the requested point count"
    );
    let mut offsets: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..span)).collect();
    offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let points: Vec<f64> = offsets
        .iter()
        .enumerate()
        .map(|(i, off)| lo + off + min_gap * i as f64)
        .collect();
    TimeScale::explicit(&points).expect("construction keeps gaps ≥ min_gap > 0")
}

/// Random scale of mixed provenance: mostly explicit point sets in
/// [−3, 3], sometimes a uniform grid.
pub fn scale(rng: &mut impl Rng) -> Arc<TimeScale> {
    let ts = if rng.gen_bool(0.25) {
        let n = rng.gen_range(3..=12);
        let a = rng.gen_range(-3.0..0.0);
        let b = a + rng.gen_range(0.5..3.0);
        TimeScale::uniform(a, b, n).unwrap()
    } else {
        let len = rng.gen_range(3..=12);
        explicit_scale(rng, len, -3.0, 3.0, 0.05)
    };
    Arc::new(ts)
}

/// Random grid function with values in [−2, 2].
pub fn grid_function(rng: &mut impl Rng, scale: &Arc<TimeScale>) -> GridFunction {
    let values = (0..scale.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    GridFunction::from_values(Arc::clone(scale), values).expect("finite values")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scales_are_valid_and_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let ts = scale(&mut rng);
            assert!(ts.len() >= 2);
            assert!(ts.points().windows(2).all(|w| w[1] - w[0] >= 0.0499));
        }

        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            scale(&mut rng).points().to_vec()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            scale(&mut rng).points().to_vec()
        };
        assert_eq!(a, b);
    }
}
