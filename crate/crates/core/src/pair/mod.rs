//! The ordered pair `(G1, G2)`: transition operator, adapted frames, fiber polynomials and
//! the divisibility conditions.
//!
//! Eigenvalues `α_i²` are indexed in ascending order; the adapted D-frame follows that order.

mod adapted;
mod fiber;
mod poly;
mod spectrum;

pub use adapted::{adapted_frame, AdaptedFrame, AdaptedPoint};
pub use fiber::{
    fiber_hp, fiber_hp_intrinsic, fiber_p, fiber_q, fiber_r, fiber_r_expanded, first_divisibility, p_intrinsic,
    r_direct, relations_cor, second_divisibility, FirstDivisibility, RelationsReport, SecondDivisibility,
    SecondDivisibilityEntry, DIVISIBILITY_TOL,
};
pub use poly::{monomials, Division, FiberPolynomial};
pub use spectrum::{
    regularity_probe, regularity_probe_with_tol, transition_operator, transition_operator_with_tol,
    RegularityReport, TransitionSpectrum, CLUSTER_TOL,
};

use crate::geometry::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum PairError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("eigenvalue multiplicities change at q = {q:?}: expected clusters {expected:?}, found {found:?}")]
    Crossing {
        q: Vec<f64>,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("region is not regular: N takes the values {n_values:?} (smallest gap near {q:?})")]
    NonRegular { q: Vec<f64>, n_values: Vec<usize> },
    #[error("adapted frame degenerates at q = {q:?}")]
    FrameDegenerate { q: Vec<f64> },
    #[error("no bracket of D-fields leaves D at q = {q:?}; cannot complete the adapted frame")]
    DegenerateCompletion { q: Vec<f64> },
    #[error("operation needs a corank 1 distribution, found corank {corank}")]
    NotCorankOne { corank: usize },
    #[error("R undefined (first divisibility fails, relative residual {residual:.3e})")]
    RUndefined { residual: f64 },
    #[error("{0}")]
    Argument(String),
}
