//! Crate-wide error type.

use crate::expr::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point {t} is not in the time scale (nearest stored point is {nearest})")]
    PointNotInScale { t: f64, nearest: f64 },

    #[error("invalid time scale: {0}")]
    InvalidScale(String),

    #[error("invalid grid function: {0}")]
    InvalidGridFunction(String),

    #[error("function is not defined at {t}: {context}")]
    OutsideDomain { t: f64, context: String },

    #[error("interval endpoints out of order: a = {a} > b = {b}")]
    IntervalOrder { a: f64, b: f64 },

    #[error("{0}")]
    Parse(#[from] ParseError),

    #[error("variable `{0}` is not bound in the evaluation environment")]
    UnboundVariable(String),

    #[error("domain error evaluating `{expr}`: {reason}")]
    EvalDomain { expr: String, reason: String },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("boundary condition violated: {0}")]
    BcViolation(String),

    #[error("usage error: {0}")]
    Usage(String),
}
