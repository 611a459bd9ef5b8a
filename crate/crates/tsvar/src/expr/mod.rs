//! The expression mini-language for integrands f(t, y, v) and outer maps
//! H(z1, …, zn): parsing, IEEE-double evaluation, and symbolic partials.
//!
//! The grammar is deliberately closed — a fixed operator set and a fixed
//! function list — so the parser stays small and fully testable. `sign`
//! appears only because it is the derivative of `abs`; it is accepted by
//! the parser so printed derivatives re-parse to the same tree.

mod diff;
mod parse;
pub mod random;

pub use parse::{parse, ParseError};

use crate::error::{Error, Result};

/// Unary functions available in the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }
}

/// Abstract syntax tree of one expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Apply(Func, Box<Expr>),
}

/// Evaluation environment: small, ordered, deterministic.
pub type Env<'a> = &'a [(&'a str, f64)];

fn lookup(env: Env, name: &str) -> Option<f64> {
    env.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    /// Evaluates under `env`. `ln`/`sqrt` of out-of-range arguments,
    /// division by zero, fractional powers of negative bases, `sign(0)`,
    /// and non-finite results are all domain errors rather than NaN/inf.
    pub fn eval(&self, env: Env) -> Result<f64> {
        let v = self.eval_inner(env)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::EvalDomain {
                expr: self.to_string(),
                reason: "result is not finite".into(),
            })
        }
    }

    fn eval_inner(&self, env: Env) -> Result<f64> {
        let domain_err = |e: &Expr, reason: &str| Error::EvalDomain {
            expr: e.to_string(),
            reason: reason.into(),
        };
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(name) => {
                lookup(env, name).ok_or_else(|| Error::UnboundVariable(name.clone()))?
            }
            Expr::Add(l, r) => l.eval_inner(env)? + r.eval_inner(env)?,
            Expr::Sub(l, r) => l.eval_inner(env)? - r.eval_inner(env)?,
            Expr::Mul(l, r) => l.eval_inner(env)? * r.eval_inner(env)?,
            Expr::Div(l, r) => {
                let den = r.eval_inner(env)?;
                if den == 0.0 {
                    return Err(domain_err(self, "division by zero"));
                }
                l.eval_inner(env)? / den
            }
            Expr::Pow(b, e) => {
                let base = b.eval_inner(env)?;
                let exp = e.eval_inner(env)?;
                if base == 0.0 && exp < 0.0 {
                    return Err(domain_err(self, "zero base with negative exponent"));
                }
                if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
                    base.powi(exp as i32)
                } else if base < 0.0 {
                    return Err(domain_err(self, "non-integer exponent with negative base"));
                } else {
                    base.powf(exp)
                }
            }
            Expr::Neg(e) => -e.eval_inner(env)?,
            Expr::Apply(f, arg) => {
                let x = arg.eval_inner(env)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Ln => {
                        if x <= 0.0 {
                            return Err(domain_err(self, "ln of a non-positive argument"));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(domain_err(self, "sqrt of a negative argument"));
                        }
                        x.sqrt()
                    }
                    Func::Abs => x.abs(),
                    Func::Sign => {
                        if x == 0.0 {
                            return Err(domain_err(self, "sign is undefined at 0"));
                        }
                        x.signum()
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::EvalDomain {
                expr: self.to_string(),
                reason: "intermediate result is not finite".into(),
            })
        }
    }

    /// Exact symbolic partial derivative with respect to `var`, simplified
    /// by constant folding and 0/1 identities only.
    pub fn differentiate(&self, var: &str) -> Expr {
        diff::differentiate(self, var)
    }

    /// Replaces every occurrence of `var` by `replacement`.
    pub fn substitute(&self, var: &str, replacement: &Expr) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(name) => {
                if name == var {
                    replacement.clone()
                } else {
                    self.clone()
                }
            }
            Expr::Add(l, r) => Expr::Add(
                Box::new(l.substitute(var, replacement)),
                Box::new(r.substitute(var, replacement)),
            ),
            Expr::Sub(l, r) => Expr::Sub(
                Box::new(l.substitute(var, replacement)),
                Box::new(r.substitute(var, replacement)),
            ),
            Expr::Mul(l, r) => Expr::Mul(
                Box::new(l.substitute(var, replacement)),
                Box::new(r.substitute(var, replacement)),
            ),
            Expr::Div(l, r) => Expr::Div(
                Box::new(l.substitute(var, replacement)),
                Box::new(r.substitute(var, replacement)),
            ),
            Expr::Pow(l, r) => Expr::Pow(
                Box::new(l.substitute(var, replacement)),
                Box::new(r.substitute(var, replacement)),
            ),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(var, replacement))),
            Expr::Apply(f, e) => Expr::Apply(*f, Box::new(e.substitute(var, replacement))),
        }
    }

    /// Collects the variable names used by the expression.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(name) => out.push(name.clone()),
            Expr::Add(l, r)
            | Expr::Sub(l, r)
            | Expr::Mul(l, r)
            | Expr::Div(l, r)
            | Expr::Pow(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Neg(e) | Expr::Apply(_, e) => e.collect_vars(out),
        }
    }

    pub fn contains_abs(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Add(l, r)
            | Expr::Sub(l, r)
            | Expr::Mul(l, r)
            | Expr::Div(l, r)
            | Expr::Pow(l, r) => l.contains_abs() || r.contains_abs(),
            Expr::Neg(e) => e.contains_abs(),
            Expr::Apply(f, e) => matches!(f, Func::Abs | Func::Sign) || e.contains_abs(),
        }
    }

    /// Applies constant folding and the 0/1 identities, bottom-up.
    pub fn simplified(self) -> Expr {
        diff::simplify(self)
    }

    // printing precedence: 1 add/sub, 2 mul/div, 3 unary minus, 4 power,
    // 5 atoms. Negative constants print as "-c" and therefore rank as
    // unary minus.
    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Const(c) if c.is_sign_negative() => 3,
            Expr::Pow(..) => 4,
            Expr::Const(_) | Expr::Var(_) | Expr::Apply(..) => 5,
        }
    }

    fn fmt_prec(&self, f: &mut std::fmt::Formatter<'_>, min: u8) -> std::fmt::Result {
        let p = self.precedence();
        if p < min {
            write!(f, "(")?;
        }
        match self {
            Expr::Const(c) => write!(f, "{}", format_const(*c))?,
            Expr::Var(name) => write!(f, "{name}")?,
            Expr::Add(l, r) => {
                l.fmt_prec(f, 1)?;
                write!(f, " + ")?;
                r.fmt_prec(f, 2)?;
            }
            Expr::Sub(l, r) => {
                l.fmt_prec(f, 1)?;
                write!(f, " - ")?;
                r.fmt_prec(f, 2)?;
            }
            Expr::Mul(l, r) => {
                l.fmt_prec(f, 2)?;
                write!(f, " * ")?;
                r.fmt_prec(f, 3)?;
            }
            Expr::Div(l, r) => {
                l.fmt_prec(f, 2)?;
                write!(f, " / ")?;
                r.fmt_prec(f, 3)?;
            }
            Expr::Pow(b, e) => {
                // the grammar only allows an atom as the base
                b.fmt_prec(f, 5)?;
                write!(f, "^")?;
                e.fmt_prec(f, 3)?;
            }
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.fmt_prec(f, 3)?;
            }
            Expr::Apply(func, e) => {
                write!(f, "{}(", func.name())?;
                e.fmt_prec(f, 1)?;
                write!(f, ")")?;
            }
        }
        if p < min {
            write!(f, ")")?;
        }
        Ok(())
    }
}

fn format_const(c: f64) -> String {
    if c == c.trunc() && c.abs() < 1e15 {
        format!("{}", c as i64)
    } else {
        format!("{c}")
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str, vars: &[&str]) -> Expr {
        parse(text, vars).unwrap()
    }

    #[test]
    fn eval_power_and_product() {
        let e = p("v^2", &["t", "y", "v"]);
        assert_eq!(e.eval(&[("v", -2.0)]).unwrap(), 4.0);

        // t*v at the interior of the 3-point scale with m = 0.75
        let e = p("t*v", &["t", "y", "v"]);
        let m = 0.75;
        let v = 2.0 * (m - 1.0);
        assert_eq!(e.eval(&[("t", -0.5), ("v", v)]).unwrap(), 0.25);
    }

    #[test]
    fn eval_domain_errors() {
        let q = p("z1/z2", &["z1", "z2"]);
        let err = q.eval(&[("z1", 1.0), ("z2", 0.0)]).unwrap_err();
        assert!(err.to_string().contains("division by zero"));
        assert!(err.to_string().contains("z2"));

        let e = p("v^0.5", &["v"]);
        assert!(e.eval(&[("v", -2.0)]).is_err());
        let e = p("ln(v)", &["v"]);
        assert!(e.eval(&[("v", -1.0)]).is_err());
        assert!(e.eval(&[("v", 0.0)]).is_err());
        let e = p("sqrt(v)", &["v"]);
        assert!(e.eval(&[("v", -1.0)]).is_err());
        assert_eq!(e.eval(&[("v", 0.0)]).unwrap(), 0.0);
    }

    #[test]
    fn eval_unbound_variable() {
        let e = p("t + v", &["t", "v"]);
        assert!(matches!(
            e.eval(&[("t", 1.0)]),
            Err(Error::UnboundVariable(_))
        ));
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = p("-2^2", &[]);
        assert_eq!(e.eval(&[]).unwrap(), -4.0);
        let e = p("(-2)^2", &[]);
        assert_eq!(e.eval(&[]).unwrap(), 4.0);
        let e = p("2^-2", &[]);
        assert_eq!(e.eval(&[]).unwrap(), 0.25);
    }

    #[test]
    fn power_is_right_associative() {
        let e = p("2^3^2", &[]);
        assert_eq!(e.eval(&[]).unwrap(), 512.0);
    }

    #[test]
    fn sign_errors_only_at_zero() {
        let e = p("sign(v)", &["v"]);
        assert_eq!(e.eval(&[("v", -3.0)]).unwrap(), -1.0);
        assert_eq!(e.eval(&[("v", 3.0)]).unwrap(), 1.0);
        assert!(e.eval(&[("v", 0.0)]).is_err());
    }

    #[test]
    fn substitution_negates_arguments() {
        // the dual-Lagrangian substitution t -> -t, v -> -v
        let e = p("t*v", &["t", "y", "v"]);
        let dual = e
            .substitute("t", &Expr::Neg(Box::new(Expr::var("t"))))
            .substitute("v", &Expr::Neg(Box::new(Expr::var("v"))));
        for (t, v) in [(0.5, 2.0), (-1.5, 3.0), (2.0, -1.0)] {
            let a = e.eval(&[("t", t), ("v", v)]).unwrap();
            let b = dual.eval(&[("t", -t), ("v", -v)]).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn display_is_canonical() {
        let cases = [
            ("v^2", &["v"][..]),
            ("1 + 2*v", &["v"]),
            ("(z1 + z2)^2", &["z1", "z2"]),
            ("-(t * v)", &["t", "v"]),
            ("t - (y - v)", &["t", "y", "v"]),
            ("(t^2)^3", &["t"]),
        ];
        for (text, vars) in cases {
            let e = p(text, vars);
            let printed = e.to_string();
            assert_eq!(
                p(&printed, vars),
                e,
                "round trip of `{text}` -> `{printed}`"
            );
        }
    }
}
