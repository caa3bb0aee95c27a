use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{structure_functions, GeometryModel, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    Full,
    Contact,
    QuasiContact,
    Other,
}

#[derive(Debug, Clone)]
pub struct DistributionType {
    pub kind: DistributionKind,
    /// Number of probe points at which `dω|_D` had each rank.
    pub rank_counts: BTreeMap<usize, usize>,
    pub diagnostic: Option<String>,
    /// Kernel line of `dω|_D` for quasi-contact distributions.
    pub abnormal: Option<AbnormalField>,
}

const RANK_TOL: f64 = 1e-8;

/// `A_ab = dω(X_a, X_b) = −ω([X_a, X_b])` for the annihilator `ω` taken as the last row of
/// the inverse frame matrix. Requires corank 1.
pub fn domega_matrix(model: &GeometryModel, q: &[f64]) -> Result<DMatrix<f64>, ModelError> {
    let n = model.dim();
    let m = model.rank();
    let c = structure_functions(model).at(q)?;
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = -c.get(j, i, n - 1);
        }
    }
    Ok(a)
}

fn numeric_rank(a: &DMatrix<f64>) -> (usize, DVector<f64>) {
    let svd = a.clone().svd(false, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let rank = if smax < 1e-12 {
        0
    } else {
        s.iter().filter(|v| **v > RANK_TOL * smax).count()
    };
    let vt = svd.v_t.expect("requested");
    let imin = s.imin();
    (rank, vt.row(imin).transpose())
}

/// Line field spanned by the kernel of `dω|_D`, given by coefficients on the model's
/// D-frame. The sign is chosen to agree with the value at a reference point.
#[derive(Debug, Clone)]
pub struct AbnormalField {
    model: GeometryModel,
    reference: DVector<f64>,
}

impl AbnormalField {
    /// Unit coefficient vector on the model's D-frame at `q`.
    pub fn coefficients_at(&self, q: &[f64]) -> Result<DVector<f64>, ModelError> {
        let a = domega_matrix(&self.model, q)?;
        let (_, mut k) = numeric_rank(&a);
        if k.dot(&self.reference) < 0.0 {
            k = -k;
        }
        Ok(k)
    }

    /// Coordinate components of the abnormal direction at `q`, Euclidean unit length.
    pub fn direction_at(&self, q: &[f64]) -> Result<DVector<f64>, ModelError> {
        let k = self.coefficients_at(q)?;
        let f = self.model.frame_matrix(q)?;
        let m = self.model.rank();
        let v = f.columns(0, m) * k;
        let norm = v.norm();
        Ok(v / norm)
    }
}

/// Classifies `D` from the rank of `dω|_D` on the probe grid.
pub fn classify_distribution(model: &GeometryModel) -> Result<DistributionType, ModelError> {
    let n = model.dim();
    let m = model.rank();
    if m == n {
        return Ok(DistributionType {
            kind: DistributionKind::Full,
            rank_counts: BTreeMap::new(),
            diagnostic: None,
            abnormal: None,
        });
    }
    if m + 1 != n {
        return Err(ModelError::invalid(
            "rank",
            format!("classification needs corank 0 or 1, found corank {}", n - m),
        ));
    }
    let mut counts = BTreeMap::new();
    for q in model.domain().probe_points(0) {
        let (r, _) = numeric_rank(&domega_matrix(model, &q)?);
        *counts.entry(r).or_insert(0) += 1;
    }
    let uniform = if counts.len() == 1 {
        counts.keys().next().copied()
    } else {
        None
    };
    let (kind, diagnostic) = match uniform {
        Some(r) if r == m && n % 2 == 1 => (DistributionKind::Contact, None),
        Some(r) if r + 1 == m && n.is_multiple_of(2) => (DistributionKind::QuasiContact, None),
        Some(r) => (
            DistributionKind::Other,
            Some(format!("rank of dω|_D is {r} on every probe point (rank {m}, dimension {n})")),
        ),
        None => (
            DistributionKind::Other,
            Some(format!("rank of dω|_D varies over the probe grid: {counts:?}")),
        ),
    };
    let abnormal = if kind == DistributionKind::QuasiContact {
        let center = model.domain().center();
        let (_, reference) = numeric_rank(&domega_matrix(model, &center)?);
        Some(AbnormalField {
            model: model.clone(),
            reference,
        })
    } else {
        None
    };
    Ok(DistributionType {
        kind,
        rank_counts: counts,
        diagnostic,
        abnormal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ScalarExpr};
    use crate::geometry::{Domain, VectorField};

    fn model(coords: &[&str], rank: usize, frame: &[&[&str]]) -> GeometryModel {
        let f = frame
            .iter()
            .map(|r| VectorField::new(r.iter().map(|e| parse(e, coords).unwrap()).collect()))
            .collect();
        let id: Vec<Vec<ScalarExpr>> = (0..rank)
            .map(|a| (0..rank).map(|b| ScalarExpr::constant(if a == b { 1.0 } else { 0.0 })).collect())
            .collect();
        GeometryModel::new(
            coords.iter().map(|s| s.to_string()).collect(),
            rank,
            f,
            id.clone(),
            id,
            Domain::cube(coords.len(), 1.0),
        )
        .unwrap()
    }

    #[test]
    fn heisenberg_is_contact() {
        let m = model(&["x", "y", "z"], 2, &[&["1", "0", "-y/2"], &["0", "1", "x/2"], &["0", "0", "1"]]);
        let t = classify_distribution(&m).unwrap();
        assert_eq!(t.kind, DistributionKind::Contact);
        assert!(t.abnormal.is_none());
    }

    #[test]
    fn engel_type_is_quasi_contact_with_vertical_kernel() {
        let m = model(
            &["x", "y", "z", "w"],
            3,
            &[&["1", "0", "0", "0"], &["0", "1", "x", "0"], &["0", "0", "0", "1"], &["0", "0", "1", "0"]],
        );
        let t = classify_distribution(&m).unwrap();
        assert_eq!(t.kind, DistributionKind::QuasiContact);
        let dir = t.abnormal.unwrap().direction_at(&[0.3, -0.2, 0.1, 0.5]).unwrap();
        assert!((dir[3].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn riemannian_is_full() {
        let m = model(&["x", "y"], 2, &[&["1", "0"], &["0", "1"]]);
        assert_eq!(classify_distribution(&m).unwrap().kind, DistributionKind::Full);
    }

    #[test]
    fn integrable_plane_field_is_other() {
        let m = model(&["x", "y", "z"], 2, &[&["1", "0", "0"], &["0", "1", "0"], &["0", "0", "1"]]);
        let t = classify_distribution(&m).unwrap();
        assert_eq!(t.kind, DistributionKind::Other);
        assert!(t.diagnostic.is_some());
    }

    #[test]
    fn rescaling_the_distribution_keeps_the_type() {
        let m = model(
            &["x", "y", "z"],
            2,
            &[&["1 + x*x", "0", "-(1 + x*x)*y/2"], &["0", "exp(z)", "exp(z)*x/2"], &["0", "0", "1"]],
        );
        assert_eq!(classify_distribution(&m).unwrap().kind, DistributionKind::Contact);
    }
}
