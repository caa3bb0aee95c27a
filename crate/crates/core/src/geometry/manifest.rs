//! JSON model manifest.
//!
//! ```json
//! {
//!   "coords": ["x", "y", "z"],
//!   "rank": 2,
//!   "frame": [["1", "0", "-y/2"], ["0", "1", "x/2"], ["0", "0", "1"]],
//!   "gram1": [["1", "0"], ["0", "1"]],
//!   "gram2": [["2", "0"], ["0", "2"]],
//!   "domain": {"min": [-1, -1, -1], "max": [1, 1, 1], "annulus": {"r_min": 0.1, "r_max": 0.4}}
//! }
//! ```
//!
//! `frame[i]` lists the coordinate components of field `i`; the first `rank` fields span
//! the distribution. Entries are expression strings or plain numbers. `annulus` is
//! optional and restricts the first two coordinates.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::{Annulus, Domain, GeometryModel, Metric, ModelError, VectorField};
use crate::expr::{parse, ScalarExpr, UnaryOp};

/// Serialisable form of a model, with expressions printed over the coordinate names.
#[derive(Debug, Clone, Serialize)]
pub struct ModelManifest {
    pub coords: Vec<String>,
    pub rank: usize,
    pub frame: Vec<Vec<String>>,
    pub gram1: Vec<Vec<String>>,
    pub gram2: Vec<Vec<String>>,
    pub domain: Domain,
}

const FIELDS: [&str; 6] = ["coords", "rank", "frame", "gram1", "gram2", "domain"];

fn field<'a>(obj: &'a serde_json::Map<String, Value>, path: &str, key: &str) -> Result<&'a Value, ModelError> {
    obj.get(key)
        .ok_or_else(|| ModelError::invalid(join(path, key), "missing field"))
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, ModelError> {
    v.as_array()
        .ok_or_else(|| ModelError::invalid(path, "expected an array"))
}

fn number(v: &Value, path: &str) -> Result<f64, ModelError> {
    v.as_f64()
        .ok_or_else(|| ModelError::invalid(path, "expected a number"))
}

fn numbers(v: &Value, path: &str) -> Result<Vec<f64>, ModelError> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}[{i}]")))
        .collect()
}

fn expr(v: &Value, path: &str, coords: &[&str]) -> Result<ScalarExpr, ModelError> {
    match v {
        Value::String(s) => parse(s, coords).map_err(|e| ModelError::invalid(path, e.to_string())),
        Value::Number(x) => Ok(ScalarExpr::constant(x.as_f64().unwrap_or(f64::NAN))),
        _ => Err(ModelError::invalid(path, "expected an expression string or a number")),
    }
}

fn expr_matrix(
    v: &Value,
    path: &str,
    rows: usize,
    cols: usize,
    coords: &[&str],
) -> Result<Vec<Vec<ScalarExpr>>, ModelError> {
    let outer = array(v, path)?;
    if outer.len() != rows {
        return Err(ModelError::invalid(
            path,
            format!("expected {rows} rows, found {}", outer.len()),
        ));
    }
    outer
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let p = format!("{path}[{i}]");
            let inner = array(row, &p)?;
            if inner.len() != cols {
                return Err(ModelError::invalid(
                    &p,
                    format!("expected {cols} entries, found {}", inner.len()),
                ));
            }
            inner
                .iter()
                .enumerate()
                .map(|(j, e)| expr(e, &format!("{p}[{j}]"), coords))
                .collect()
        })
        .collect()
}

fn domain(v: &Value) -> Result<Domain, ModelError> {
    let obj = v
        .as_object()
        .ok_or_else(|| ModelError::invalid("domain", "expected an object"))?;
    for key in obj.keys() {
        if !["min", "max", "annulus"].contains(&key.as_str()) {
            return Err(ModelError::invalid(format!("domain.{key}"), "unknown field"));
        }
    }
    let min = numbers(field(obj, "domain", "min")?, "domain.min")?;
    let max = numbers(field(obj, "domain", "max")?, "domain.max")?;
    let annulus = match obj.get("annulus") {
        None | Some(Value::Null) => None,
        Some(a) => {
            let ao = a
                .as_object()
                .ok_or_else(|| ModelError::invalid("domain.annulus", "expected an object"))?;
            Some(Annulus {
                r_min: number(field(ao, "domain.annulus", "r_min")?, "domain.annulus.r_min")?,
                r_max: number(field(ao, "domain.annulus", "r_max")?, "domain.annulus.r_max")?,
            })
        }
    };
    Ok(Domain { min, max, annulus })
}

fn valid_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && UnaryOp::from_name(s).is_none()
}

impl GeometryModel {
    /// Parses and validates a manifest. Every failure is an [`ModelError::Invalid`]
    /// carrying the JSON path of the offending field.
    pub fn from_json_str(text: &str) -> Result<GeometryModel, ModelError> {
        let v: Value = serde_json::from_str(text)
            .map_err(|e| ModelError::invalid("$", format!("not valid JSON: {e}")))?;
        GeometryModel::from_json_value(&v)
    }

    pub fn from_json_value(v: &Value) -> Result<GeometryModel, ModelError> {
        let obj = v
            .as_object()
            .ok_or_else(|| ModelError::invalid("$", "expected an object"))?;
        for key in obj.keys() {
            if !FIELDS.contains(&key.as_str()) {
                return Err(ModelError::invalid(key.clone(), "unknown field"));
            }
        }
        let coords_v = array(field(obj, "", "coords")?, "coords")?;
        let mut coords = Vec::with_capacity(coords_v.len());
        for (i, c) in coords_v.iter().enumerate() {
            let s = c
                .as_str()
                .ok_or_else(|| ModelError::invalid(format!("coords[{i}]"), "expected a string"))?;
            if !valid_identifier(s) {
                return Err(ModelError::invalid(
                    format!("coords[{i}]"),
                    format!("`{s}` is not a usable coordinate name"),
                ));
            }
            if coords.iter().any(|c: &String| c == s) {
                return Err(ModelError::invalid(format!("coords[{i}]"), format!("duplicate name `{s}`")));
            }
            coords.push(s.to_string());
        }
        let n = coords.len();
        if n == 0 {
            return Err(ModelError::invalid("coords", "at least one coordinate is required"));
        }
        let rank_v = field(obj, "", "rank")?;
        let rank = rank_v
            .as_u64()
            .ok_or_else(|| ModelError::invalid("rank", "expected a positive integer"))? as usize;
        if rank == 0 || rank > n {
            return Err(ModelError::invalid("rank", format!("must lie in 1..={n}, found {rank}")));
        }
        let names: Vec<&str> = coords.iter().map(String::as_str).collect();
        let frame = expr_matrix(field(obj, "", "frame")?, "frame", n, n, &names)?
            .into_iter()
            .map(VectorField::new)
            .collect();
        let gram1 = expr_matrix(field(obj, "", "gram1")?, "gram1", rank, rank, &names)?;
        let gram2 = expr_matrix(field(obj, "", "gram2")?, "gram2", rank, rank, &names)?;
        let domain = domain(field(obj, "", "domain")?)?;
        let model = GeometryModel::new(coords, rank, frame, gram1, gram2, domain)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GeometryModel, ModelError> {
        let text = std::fs::read_to_string(path)?;
        GeometryModel::from_json_str(&text)
    }

    pub fn to_manifest(&self) -> ModelManifest {
        let names = self.coord_refs();
        let print = |rows: &[Vec<ScalarExpr>]| -> Vec<Vec<String>> {
            rows.iter()
                .map(|r| r.iter().map(|e| e.to_source(&names)).collect())
                .collect()
        };
        let frame: Vec<Vec<ScalarExpr>> = self.frame().iter().map(|f| f.components().to_vec()).collect();
        ModelManifest {
            coords: self.coords().to_vec(),
            rank: self.rank(),
            frame: print(&frame),
            gram1: print(self.gram(Metric::First)),
            gram2: print(self.gram(Metric::Second)),
            domain: self.domain().clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_manifest()).expect("manifest serialises")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}
