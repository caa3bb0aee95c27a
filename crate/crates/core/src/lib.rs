//! Geodesically equivalent pairs of Riemannian and sub-Riemannian metrics.
//!
//! The crate builds metric pairs on a coordinate chart, analyses the transition
//! operator between them, and certifies equivalence numerically by integrating
//! matched normal extremals.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constructors;
pub mod expr;
pub mod geometry;
pub mod hamiltonian;
pub mod pair;
pub mod verifier;

pub use expr::{parse, EvalError, ParseError, ScalarExpr};
