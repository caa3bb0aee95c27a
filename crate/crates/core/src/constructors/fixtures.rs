use serde::{Deserialize, Serialize};

use super::{parse_at, ConstructError};
use crate::expr::{parse, ScalarExpr};
use crate::geometry::{Domain, GeometryModel, VectorField};

/// Euclidean plane against the hemisphere metric pulled back by central projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeltramiSpec {
    pub half_width: f64,
}

impl Default for BeltramiSpec {
    fn default() -> Self {
        BeltramiSpec { half_width: 1.0 }
    }
}

/// `G1 = dx² + dy²` and `G2 = F*(round metric)` with
/// `F(x, y) = (x, y, 1)/√(1 + x² + y²)`, the inverse of the central projection of the unit
/// hemisphere onto the tangent plane `z = 1`. `G2` is obtained by differentiating `F`.
pub fn build_beltrami(spec: &BeltramiSpec) -> Result<GeometryModel, ConstructError> {
    if !(spec.half_width > 0.0) {
        return Err(super::params_err("half_width", "must be positive"));
    }
    let (x, y) = (ScalarExpr::var(0), ScalarExpr::var(1));
    let s = (1.0 + x.square() + y.square()).powf(-0.5);
    let f = [&x * &s, &y * &s, s];
    let grad: Vec<[ScalarExpr; 2]> = f.iter().map(|c| [c.differentiate(0), c.differentiate(1)]).collect();
    let entry = |a: usize, b: usize| {
        grad.iter()
            .map(|g| &g[a] * &g[b])
            .reduce(|acc, t| acc + t)
            .expect("three components")
    };
    let g2 = vec![vec![entry(0, 0), entry(0, 1)], vec![entry(1, 0), entry(1, 1)]];
    let g1 = vec![
        vec![ScalarExpr::one(), ScalarExpr::zero()],
        vec![ScalarExpr::zero(), ScalarExpr::one()],
    ];
    let model = GeometryModel::with_coordinate_frame(
        vec!["x".into(), "y".into()],
        g1,
        g2,
        Domain::cube(2, spec.half_width),
    )?;
    model.validate()?;
    Ok(model)
}

/// Heisenberg distribution `X1 = ∂x − (y/2)∂z`, `X2 = ∂y + (x/2)∂z` with `G1` making the
/// pair orthonormal and `G2 = factor · G1`, or an explicit Gram matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeisenbergSpec {
    /// Conformal factor in `x, y, z`; ignored when `gram2` is given.
    pub factor: String,
    pub gram2: Option<Vec<Vec<String>>>,
    pub half_width: f64,
}

impl Default for HeisenbergSpec {
    fn default() -> Self {
        HeisenbergSpec {
            factor: "2".into(),
            gram2: None,
            half_width: 1.0,
        }
    }
}

pub fn build_heisenberg(spec: &HeisenbergSpec) -> Result<GeometryModel, ConstructError> {
    const C: [&str; 3] = ["x", "y", "z"];
    if !(spec.half_width > 0.0) {
        return Err(super::params_err("half_width", "must be positive"));
    }
    let e = |s: &str| parse(s, &C).expect("fixed frame");
    let frame = [["1", "0", "-y/2"], ["0", "1", "x/2"], ["0", "0", "1"]]
        .iter()
        .map(|r| VectorField::new(r.iter().map(|s| e(s)).collect()))
        .collect();
    let g1 = vec![
        vec![ScalarExpr::one(), ScalarExpr::zero()],
        vec![ScalarExpr::zero(), ScalarExpr::one()],
    ];
    let g2 = match &spec.gram2 {
        Some(rows) => {
            if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
                return Err(super::params_err("gram2", "expected a 2x2 matrix"));
            }
            let mut g = Vec::new();
            for (a, row) in rows.iter().enumerate() {
                let mut r = Vec::new();
                for (b, src) in row.iter().enumerate() {
                    r.push(parse_at(src, &C, &format!("gram2[{a}][{b}]"))?);
                }
                g.push(r);
            }
            g
        }
        None => {
            let f = parse_at(&spec.factor, &C, "factor")?;
            vec![vec![f.clone(), ScalarExpr::zero()], vec![ScalarExpr::zero(), f]]
        }
    };
    let model = GeometryModel::new(
        C.iter().map(|s| s.to_string()).collect(),
        2,
        frame,
        g1,
        g2,
        Domain::cube(3, spec.half_width),
    )?;
    model.validate()?;
    Ok(model)
}

/// Identical Euclidean metrics on `ℝⁿ`.
pub fn build_euclidean(n: usize) -> Result<GeometryModel, ConstructError> {
    if n == 0 {
        return Err(super::params_err("dim", "must be positive"));
    }
    let id: Vec<Vec<ScalarExpr>> = (0..n)
        .map(|i| (0..n).map(|j| ScalarExpr::constant(if i == j { 1.0 } else { 0.0 })).collect())
        .collect();
    let model = GeometryModel::with_coordinate_frame(
        (1..=n).map(|i| format!("x{i}")).collect(),
        id.clone(),
        id,
        Domain::cube(n, 1.0),
    )?;
    model.validate()?;
    Ok(model)
}
