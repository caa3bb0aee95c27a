//! Charts, frames, distributions and metric pairs.
//!
//! A [`GeometryModel`] lives on one coordinate chart. Its frame has `n` fields, the first
//! `m` of which span the distribution `D`; the two Gram matrices give `G1` and `G2` on
//! that part of the frame.

mod classify;
mod domain;
mod field;
mod manifest;
mod model;
mod orthonormal;
mod structure;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::expr::EvalError;

pub use classify::{classify_distribution, domega_matrix, AbnormalField, DistributionKind, DistributionType};
pub use domain::{Annulus, Domain};
pub use field::{lie_bracket, VectorField};
pub use manifest::ModelManifest;
pub use model::GeometryModel;
pub use orthonormal::{orthonormalize, OrthonormalFrame};
pub use structure::{structure_functions, StructureFunctions, StructureTensor};

/// Which metric of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "1")]
    First,
    #[serde(rename = "2")]
    Second,
}

impl Metric {
    pub fn from_tag(tag: u8) -> Option<Metric> {
        match tag {
            1 => Some(Metric::First),
            2 => Some(Metric::Second),
            _ => None,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Metric::First => 1,
            Metric::Second => 2,
        }
    }

    pub fn other(self) -> Metric {
        match self {
            Metric::First => Metric::Second,
            Metric::Second => Metric::First,
        }
    }

    pub(crate) fn index(self) -> usize {
        self.tag() as usize - 1
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("evaluation failed at q = {q:?}: {source}")]
    Eval { q: Vec<f64>, source: EvalError },
    #[error("frame is singular at q = {q:?}")]
    SingularFrame { q: Vec<f64> },
    #[error("Gram matrix of G{metric} is not positive definite at q = {q:?}")]
    NotPositiveDefinite { metric: u8, q: Vec<f64> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ModelError {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn eval(q: &[f64], source: EvalError) -> Self {
        ModelError::Eval {
            q: q.to_vec(),
            source,
        }
    }
}

/// A pointwise-evaluable frame of `n` vector fields.
pub trait Frame {
    /// Matrix whose column `i` holds the coordinate components of field `i` at `q`.
    fn matrix_at(&self, q: &[f64]) -> Result<DMatrix<f64>, ModelError>;
}

impl Frame for GeometryModel {
    fn matrix_at(&self, q: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        self.frame_matrix(q)
    }
}

/// Solves `F x = b` for the frame matrix, mapping singularity to a model error.
pub(crate) fn frame_solve(
    f: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &[f64],
) -> Result<DMatrix<f64>, ModelError> {
    f.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| ModelError::SingularFrame { q: q.to_vec() })
}
