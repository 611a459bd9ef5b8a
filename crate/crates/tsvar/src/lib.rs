//! Numerical engine for the backwards (nabla) calculus of variations on
//! finite time scales.
//!
//! The crate evaluates composed variational functionals H(F₁, …, Fₙ) built
//! from nabla integrals, checks Euler-Lagrange and natural-boundary
//! residuals, verifies the delta/nabla duality transform, and solves
//! desk-scale variational problems directly.
//!
//! Module map:
//! - [`timescale`]: finite time scales, jump operators, graininess.
//! - [`calculus`]: exact delta/nabla derivatives and Cauchy integrals of
//!   grid functions.
//! - [`expr`]: the expression mini-language for integrands and outer maps,
//!   with symbolic partial derivatives.
//! - [`variational`]: composed functionals, Euler-Lagrange residuals,
//!   natural boundary conditions, product/quotient corollary routes.
//! - [`duality`]: dual scale, dual function, dual Lagrangian, and the
//!   executable duality identity checks.
//! - [`solver`]: stationarity solves over free trajectory values, the
//!   one-dimensional scan, and multi-start Q-system solves.
//! - [`random`]: seeded generators behind the randomized suites.

// index loops mirror the stencil algebra; negated comparisons reject NaN
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod duality;
pub mod error;
pub mod expr;
pub mod random;
pub mod solver;
pub mod timescale;
pub mod variational;

pub use error::{Error, Result};
