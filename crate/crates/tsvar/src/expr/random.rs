//! Random smooth expressions for the property suites.
//!
//! The node set is restricted to total functions (no division, ln, sqrt,
//! or abs), so every generated expression evaluates everywhere. Used by
//! the duality check suite and by the randomized tests.

use rand::Rng;

use super::{Expr, Func};

/// A random smooth expression over `vars` with subtree depth ≤ `depth`.
pub fn smooth_expr(rng: &mut impl Rng, vars: &[&str], depth: usize) -> Expr {
    if depth == 0 || rng.gen_range(0..10) < 2 {
        return leaf(rng, vars);
    }
    match rng.gen_range(0..10) {
        0 | 1 => Expr::Add(
            Box::new(smooth_expr(rng, vars, depth - 1)),
            Box::new(smooth_expr(rng, vars, depth - 1)),
        ),
        2 | 3 => Expr::Sub(
            Box::new(smooth_expr(rng, vars, depth - 1)),
            Box::new(smooth_expr(rng, vars, depth - 1)),
        ),
        4 | 5 => Expr::Mul(
            Box::new(smooth_expr(rng, vars, depth - 1)),
            Box::new(smooth_expr(rng, vars, depth - 1)),
        ),
        6 => Expr::Neg(Box::new(smooth_expr(rng, vars, depth - 1))),
        7 => Expr::Pow(
            Box::new(leaf(rng, vars)),
            Box::new(Expr::Const(rng.gen_range(2..=3) as f64)),
        ),
        8 => Expr::Apply(Func::Sin, Box::new(smooth_expr(rng, vars, depth - 1))),
        _ => Expr::Apply(Func::Cos, Box::new(smooth_expr(rng, vars, depth - 1))),
    }
}

/// A random polynomial in `vars`: total degree ≤ 3, a handful of terms.
pub fn polynomial(rng: &mut impl Rng, vars: &[&str]) -> Expr {
    let terms = rng.gen_range(1..=4);
    let mut acc: Option<Expr> = None;
    for _ in 0..terms {
        let mut term = Expr::Const(quantized(rng));
        let factors = rng.gen_range(0..=3);
        for _ in 0..factors {
            let v = vars[rng.gen_range(0..vars.len())];
            term = Expr::Mul(Box::new(term), Box::new(Expr::var(v)));
        }
        acc = Some(match acc {
            None => term,
            Some(prev) => Expr::Add(Box::new(prev), Box::new(term)),
        });
    }
    acc.unwrap()
}

fn leaf(rng: &mut impl Rng, vars: &[&str]) -> Expr {
    if !vars.is_empty() && rng.gen_bool(0.6) {
        Expr::var(vars[rng.gen_range(0..vars.len())])
    } else {
        Expr::Const(quantized(rng))
    }
}

// quarter-step constants in [-2, 2] keep magnitudes tame and make
// failures easy to read
fn quantized(rng: &mut impl Rng) -> f64 {
    rng.gen_range(-8..=8) as f64 * 0.25
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_expressions_evaluate_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let e = smooth_expr(&mut rng, &["t", "y", "v"], 3);
            let env: &[(&str, f64)] = &[
                ("t", rng.gen_range(-2.0..2.0)),
                ("y", rng.gen_range(-2.0..2.0)),
                ("v", rng.gen_range(-2.0..2.0)),
            ];
            assert!(e.eval(env).is_ok(), "expression `{e}` failed to evaluate");
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let gen = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            smooth_expr(&mut rng, &["t"], 4).to_string()
        };
        assert_eq!(gen(3), gen(3));
        assert_ne!(gen(3), gen(4));
    }
}
