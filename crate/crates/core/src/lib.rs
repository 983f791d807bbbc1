//! Exact lambda-bracket calculus on freely generated vertex algebras.
//!
//! The crate is organised bottom-up: [`scalar`] coefficients, [`terms`]
//! for elements of the enveloping vertex algebra, the [`wick`] rewrite
//! engine, Zhu algebras in [`zhu`], finite-dimensional Lie data in
//! [`liealg`], standard conformal algebras in [`constructions`], the
//! reduction pipeline in [`walgebra`], Poisson vertex algebras in [`pva`]
//! and the command-line front end in [`cli`].

pub mod cli;
pub mod constructions;
pub mod liealg;
pub mod linsolve;
pub mod pva;
pub mod scalar;
pub mod terms;
pub mod walgebra;
pub mod wick;
pub mod zhu;

pub use scalar::Scalar;
pub use terms::{Expr, LambdaExpr, Monomial, Parity, Registry, Term};
pub use wick::{Engine, LcaSpec};
