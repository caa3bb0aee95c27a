//! Metric pairs built from the classification theorems, ready for analysis.
//!
//! Every builder takes a serde parameter struct whose `Default` is a working example, so
//! `generate(kind, &json!({}))` always produces a model.

mod fixtures;
mod gendini;
mod levi_civita;
mod quasi_contact;

use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::expr::{parse, ScalarExpr};
use crate::geometry::{GeometryModel, ModelError};

pub use fixtures::{build_beltrami, build_euclidean, build_heisenberg, BeltramiSpec, HeisenbergSpec};
pub use gendini::{build_gendini_case1, build_gendini_case2, Gendini1Spec, Gendini2Spec};
pub use levi_civita::{
    build_dini, build_levi_civita, levi_civita_pair, recover_betas, DiniSpec, LeviCivitaBlock, LeviCivitaPair,
    LeviCivitaSpec,
};
pub use quasi_contact::{build_quasi_contact, quasi_contact_pair, QuasiContactPair, QuasiContactReport, QuasiContactSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConstructError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {message}")]
    Params { path: String, message: String },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("unknown generator `{0}`")]
    UnknownKind(String),
}

fn params_err(path: impl Into<String>, message: impl Into<String>) -> ConstructError {
    ConstructError::Params {
        path: path.into(),
        message: message.into(),
    }
}

fn parse_at(src: &str, coords: &[&str], path: &str) -> Result<ScalarExpr, ConstructError> {
    parse(src, coords).map_err(|e| params_err(path, e.to_string()))
}

fn eval_at(e: &ScalarExpr, x: &[f64], what: &str) -> Result<f64, ConstructError> {
    e.eval(x)
        .map_err(|err| ConstructError::Hypothesis(format!("{what} cannot be evaluated at {x:?}: {err}")))
}

/// Sign of `e` on every point, or an error when it vanishes or changes sign.
fn constant_sign(e: &ScalarExpr, points: &[Vec<f64>], what: &str) -> Result<f64, ConstructError> {
    let mut sign = 0.0;
    for p in points {
        let v = eval_at(e, p, what)?;
        let s = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            return Err(ConstructError::Hypothesis(format!("{what} vanishes at {p:?}")));
        };
        if sign == 0.0 {
            sign = s;
        } else if s != sign {
            return Err(ConstructError::Hypothesis(format!("{what} changes sign on the domain (at {p:?})")));
        }
    }
    Ok(sign)
}

fn from_params<T: DeserializeOwned>(params: &Value) -> Result<T, ConstructError> {
    let v = if params.is_null() { Value::Object(Default::default()) } else { params.clone() };
    serde_json::from_value(v).map_err(|e| params_err("params", e.to_string()))
}

pub const GENERATORS: [&str; 8] = [
    "levi-civita",
    "dini",
    "gendini1",
    "gendini2",
    "quasi-contact",
    "beltrami",
    "heisenberg",
    "euclidean",
];

/// Dispatches on a generator name with JSON parameters.
pub fn generate(kind: &str, params: &Value) -> Result<GeometryModel, ConstructError> {
    match kind {
        "levi-civita" => build_levi_civita(&from_params(params)?),
        "dini" => build_dini(&from_params(params)?),
        "gendini1" => build_gendini_case1(&from_params(params)?),
        "gendini2" => build_gendini_case2(&from_params(params)?),
        "quasi-contact" => build_quasi_contact(&from_params(params)?),
        "beltrami" => build_beltrami(&from_params(params)?),
        "heisenberg" => build_heisenberg(&from_params(params)?),
        "euclidean" => {
            let n = params.get("dim").and_then(Value::as_u64).unwrap_or(2) as usize;
            build_euclidean(n)
        }
        other => Err(ConstructError::UnknownKind(other.to_string())),
    }
}
