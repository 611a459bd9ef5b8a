//! Symbolic differentiation and the light simplifier behind it.

use super::{Expr, Func};

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

pub(super) fn differentiate(e: &Expr, var: &str) -> Expr {
    simplify(raw_derivative(e, var))
}

fn raw_derivative(e: &Expr, var: &str) -> Expr {
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(name) => Expr::Const(if name == var { 1.0 } else { 0.0 }),
        Expr::Add(l, r) => Expr::Add(b(raw_derivative(l, var)), b(raw_derivative(r, var))),
        Expr::Sub(l, r) => Expr::Sub(b(raw_derivative(l, var)), b(raw_derivative(r, var))),
        Expr::Mul(l, r) => Expr::Add(
            b(Expr::Mul(b(raw_derivative(l, var)), r.clone())),
            b(Expr::Mul(l.clone(), b(raw_derivative(r, var)))),
        ),
        Expr::Div(l, r) => Expr::Div(
            b(Expr::Sub(
                b(Expr::Mul(b(raw_derivative(l, var)), r.clone())),
                b(Expr::Mul(l.clone(), b(raw_derivative(r, var)))),
            )),
            b(Expr::Pow(r.clone(), b(Expr::Const(2.0)))),
        ),
        Expr::Pow(base, exp) => match exp.as_ref() {
            // power rule for constant exponents
            Expr::Const(c) => Expr::Mul(
                b(Expr::Mul(
                    b(Expr::Const(*c)),
                    b(Expr::Pow(base.clone(), b(Expr::Const(c - 1.0)))),
                )),
                b(raw_derivative(base, var)),
            ),
            // general case: u^v * (v' ln u + v u'/u)
            _ => Expr::Mul(
                b(e.clone()),
                b(Expr::Add(
                    b(Expr::Mul(
                        b(raw_derivative(exp, var)),
                        b(Expr::Apply(Func::Ln, base.clone())),
                    )),
                    b(Expr::Div(
                        b(Expr::Mul(exp.clone(), b(raw_derivative(base, var)))),
                        base.clone(),
                    )),
                )),
            ),
        },
        Expr::Neg(inner) => Expr::Neg(b(raw_derivative(inner, var))),
        Expr::Apply(f, arg) => {
            let du = raw_derivative(arg, var);
            let outer = match f {
                Func::Sin => Expr::Apply(Func::Cos, arg.clone()),
                Func::Cos => Expr::Neg(b(Expr::Apply(Func::Sin, arg.clone()))),
                Func::Exp => Expr::Apply(Func::Exp, arg.clone()),
                Func::Ln => Expr::Div(b(Expr::Const(1.0)), arg.clone()),
                Func::Sqrt => Expr::Div(
                    b(Expr::Const(1.0)),
                    b(Expr::Mul(
                        b(Expr::Const(2.0)),
                        b(Expr::Apply(Func::Sqrt, arg.clone())),
                    )),
                ),
                // abs is differentiated symbolically; sign(0) errors at
                // evaluation time, not here
                Func::Abs => Expr::Apply(Func::Sign, arg.clone()),
                // zero almost everywhere
                Func::Sign => Expr::Const(0.0),
            };
            Expr::Mul(b(outer), b(du))
        }
    }
}

/// Constant folding plus the 0/1 identities. Nothing cleverer, so the
/// printed derivative stays recognizable next to its source expression.
// guards instead of float literal patterns: the latter are deprecated
#[allow(clippy::redundant_guards)]
pub(super) fn simplify(e: Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e,
        Expr::Add(l, r) => match (simplify(*l), simplify(*r)) {
            (Expr::Const(a), Expr::Const(b)) if (a + b).is_finite() => Expr::Const(a + b),
            (Expr::Const(c), r) if c == 0.0 => r,
            (l, Expr::Const(c)) if c == 0.0 => l,
            (l, r) => Expr::Add(b(l), b(r)),
        },
        Expr::Sub(l, r) => match (simplify(*l), simplify(*r)) {
            (Expr::Const(a), Expr::Const(b)) if (a - b).is_finite() => Expr::Const(a - b),
            (l, Expr::Const(c)) if c == 0.0 => l,
            (Expr::Const(c), r) if c == 0.0 => simplify(Expr::Neg(b(r))),
            (l, r) => Expr::Sub(b(l), b(r)),
        },
        Expr::Mul(l, r) => match (simplify(*l), simplify(*r)) {
            (Expr::Const(a), Expr::Const(b)) if (a * b).is_finite() => Expr::Const(a * b),
            (Expr::Const(c), _) | (_, Expr::Const(c)) if c == 0.0 => Expr::Const(0.0),
            (Expr::Const(c), r) if c == 1.0 => r,
            (l, Expr::Const(c)) if c == 1.0 => l,
            (l, r) => Expr::Mul(b(l), b(r)),
        },
        Expr::Div(l, r) => match (simplify(*l), simplify(*r)) {
            (Expr::Const(a), Expr::Const(c)) if c != 0.0 && (a / c).is_finite() => {
                Expr::Const(a / c)
            }
            (l, Expr::Const(c)) if c == 1.0 => l,
            (l, r) => Expr::Div(b(l), b(r)),
        },
        Expr::Pow(base, exp) => match (simplify(*base), simplify(*exp)) {
            (base, Expr::Const(c)) if c == 1.0 => base,
            (_, Expr::Const(c)) if c == 0.0 => Expr::Const(1.0),
            (Expr::Const(a), Expr::Const(c))
                if c.fract() == 0.0
                    && c.abs() <= 64.0
                    && (a != 0.0 || c > 0.0)
                    && a.powi(c as i32).is_finite() =>
            {
                Expr::Const(a.powi(c as i32))
            }
            (base, exp) => Expr::Pow(b(base), b(exp)),
        },
        Expr::Neg(inner) => match simplify(*inner) {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(x) => *x,
            x => Expr::Neg(b(x)),
        },
        Expr::Apply(f, arg) => {
            let arg = simplify(*arg);
            if let Expr::Const(c) = arg {
                let folded = match f {
                    Func::Sin => Some(c.sin()),
                    Func::Cos => Some(c.cos()),
                    Func::Exp => Some(c.exp()),
                    Func::Ln if c > 0.0 => Some(c.ln()),
                    Func::Sqrt if c >= 0.0 => Some(c.sqrt()),
                    Func::Abs => Some(c.abs()),
                    Func::Sign if c != 0.0 => Some(c.signum()),
                    _ => None,
                };
                if let Some(v) = folded.filter(|v| v.is_finite()) {
                    return Expr::Const(v);
                }
            }
            Expr::Apply(f, b(arg))
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    fn check(expr: &str, var: &str, expected: &str, vars: &[&str]) {
        let e = parse(expr, vars).unwrap();
        let d = e.differentiate(var);
        let want = parse(expected, vars).unwrap();
        assert_eq!(d, want, "d/d{var} {expr} -> {d}, expected {expected}");
    }

    #[test]
    fn power_rule() {
        check("v^2", "v", "2*v", &["t", "y", "v"]);
    }

    #[test]
    fn sum_of_powers() {
        check("v + v^2", "v", "1 + 2*v", &["t", "y", "v"]);
    }

    #[test]
    fn product_gradient_component() {
        check("z1*z2", "z1", "z2", &["z1", "z2"]);
        check("z1*z2", "z2", "z1", &["z1", "z2"]);
    }

    #[test]
    fn quotient_rule() {
        let e = parse("z1/z2", &["z1", "z2"]).unwrap();
        let d1 = e.differentiate("z1");
        let d2 = e.differentiate("z2");
        let env: &[(&str, f64)] = &[("z1", 3.0), ("z2", 2.0)];
        assert!((d1.eval(env).unwrap() - 0.5).abs() <= 1e-15);
        assert!((d2.eval(env).unwrap() + 0.75).abs() <= 1e-15);
    }

    #[test]
    fn chain_rule_through_functions() {
        let e = parse("sin(t^2)", &["t"]).unwrap();
        let d = e.differentiate("t");
        let t = 0.7_f64;
        let want = (t * t).cos() * 2.0 * t;
        assert!((d.eval(&[("t", t)]).unwrap() - want).abs() <= 1e-14);
    }

    #[test]
    fn abs_differentiates_to_sign() {
        let e = parse("abs(v)", &["v"]).unwrap();
        let d = e.differentiate("v");
        assert_eq!(d, parse("sign(v)", &["v"]).unwrap());
        assert_eq!(d.eval(&[("v", -2.0)]).unwrap(), -1.0);
        assert!(d.eval(&[("v", 0.0)]).is_err());
    }

    #[test]
    fn constant_derivative_is_zero() {
        check("3 + sin(2)", "v", "0", &["v"]);
    }

    #[test]
    fn general_power_with_variable_exponent() {
        let e = parse("t^v", &["t", "v"]).unwrap();
        let d = e.differentiate("v");
        let (t, v) = (2.0_f64, 1.5_f64);
        let want = t.powf(v) * t.ln();
        assert!((d.eval(&[("t", t), ("v", v)]).unwrap() - want).abs() <= 1e-12);
    }
}
