use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::PairError;
use crate::geometry::{GeometryModel, Metric, ModelError};

/// Default relative gap below which two eigenvalues count as one.
pub const CLUSTER_TOL: f64 = 1e-7;

/// Transition operator `S` with `G2(v, w) = G1(Sv, w)` on `D(q)`, on the model D-frame.
#[derive(Debug, Clone, Serialize)]
pub struct TransitionSpectrum {
    pub q: Vec<f64>,
    /// Matrix of `S` acting on coefficient vectors over the model D-frame.
    #[serde(serialize_with = "ser_matrix")]
    pub s: DMatrix<f64>,
    /// `α_i²`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are G1-orthonormal eigenvectors, as coefficients on the model D-frame.
    #[serde(serialize_with = "ser_matrix")]
    pub eigenvectors: DMatrix<f64>,
    /// Index sets of eigenvalues within the clustering tolerance, ascending.
    pub clusters: Vec<Vec<usize>>,
}

pub(crate) fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for r in 0..m.nrows() {
        let row: Vec<f64> = m.row(r).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

impl TransitionSpectrum {
    /// Number of distinct eigenvalues, `N(q)`.
    pub fn distinct(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    /// Smallest relative gap between neighbouring eigenvalues, infinite when `m = 1`.
    pub fn min_relative_gap(&self) -> f64 {
        relative_gaps(&self.eigenvalues).fold(f64::INFINITY, f64::min)
    }

    pub fn cluster_of(&self, i: usize) -> usize {
        self.clusters
            .iter()
            .position(|c| c.contains(&i))
            .expect("every index lies in a cluster")
    }
}

fn relative_gaps(ev: &[f64]) -> impl Iterator<Item = f64> + '_ {
    ev.windows(2).map(|w| (w[1] - w[0]) / w[1].abs().max(f64::MIN_POSITIVE))
}

pub(crate) fn cluster(ev: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, g) in std::iter::once(f64::INFINITY).chain(relative_gaps(ev)).enumerate() {
        if g > tol {
            out.push(vec![i]);
        } else {
            out.last_mut().expect("first index opens a cluster").push(i);
        }
    }
    out
}

/// Spectrum of `S` at `q` from symmetric matrices `g1`, `g2`.
pub(crate) fn spectrum_of(
    q: &[f64],
    g1: &DMatrix<f64>,
    g2: &DMatrix<f64>,
    tol: f64,
) -> Result<TransitionSpectrum, PairError> {
    let m = g1.nrows();
    let l = g1
        .clone()
        .cholesky()
        .ok_or_else(|| ModelError::NotPositiveDefinite { metric: 1, q: q.to_vec() })?
        .l();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(m, m))
        .ok_or_else(|| ModelError::NotPositiveDefinite { metric: 1, q: q.to_vec() })?;
    let mut a = &linv * g2 * linv.transpose();
    a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|x, y| eig.eigenvalues[*x].total_cmp(&eig.eigenvalues[*y]));
    let eigenvalues: Vec<f64> = order.iter().map(|i| eig.eigenvalues[*i]).collect();
    if eigenvalues.iter().any(|v| !(*v > 0.0)) {
        return Err(ModelError::NotPositiveDefinite { metric: 2, q: q.to_vec() }.into());
    }
    let w = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    let eigenvectors = linv.transpose() * w;
    let s = g1
        .clone()
        .cholesky()
        .expect("factorised above")
        .solve(g2);
    Ok(TransitionSpectrum {
        q: q.to_vec(),
        s,
        clusters: cluster(&eigenvalues, tol),
        eigenvalues,
        eigenvectors,
    })
}

/// Transition operator and its spectrum at `q`, clustered at [`CLUSTER_TOL`].
pub fn transition_operator(model: &GeometryModel, q: &[f64]) -> Result<TransitionSpectrum, PairError> {
    transition_operator_with_tol(model, q, CLUSTER_TOL)
}

pub fn transition_operator_with_tol(
    model: &GeometryModel,
    q: &[f64],
    tol: f64,
) -> Result<TransitionSpectrum, PairError> {
    let g1 = model.gram_matrix(Metric::First, q)?;
    let g2 = model.gram_matrix(Metric::Second, q)?;
    spectrum_of(q, &g1, &g2, tol)
}

/// Step used to approach points where the Gram entries cannot be evaluated.
const LIMIT_STEP: f64 = 1e-6;

/// Spectrum at `q`, or, when the Gram entries are undefined there, of the operator averaged
/// over the points `q ± 1e-6 e_k`. The second component tells which one was used.
pub(crate) fn spectrum_or_limit(
    model: &GeometryModel,
    q: &[f64],
    tol: f64,
) -> Result<(TransitionSpectrum, bool), PairError> {
    match transition_operator_with_tol(model, q, tol) {
        Ok(s) => Ok((s, false)),
        Err(PairError::Model(ModelError::Eval { .. })) => {
            let m = model.rank();
            let mut g1 = DMatrix::zeros(m, m);
            let mut g2 = DMatrix::zeros(m, m);
            let mut count = 0.0;
            for k in 0..q.len() {
                for sign in [-1.0, 1.0] {
                    let mut p = q.to_vec();
                    p[k] += sign * LIMIT_STEP;
                    g1 += model.gram_matrix(Metric::First, &p)?;
                    g2 += model.gram_matrix(Metric::Second, &p)?;
                    count += 1.0;
                }
            }
            Ok((spectrum_of(q, &(g1 / count), &(g2 / count), tol)?, true))
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub regular: bool,
    /// Distinct values of `N` seen in the ball, ascending.
    pub n_values: Vec<usize>,
    pub samples: usize,
    /// Samples evaluated as limits because the Gram entries are undefined there.
    pub limit_samples: usize,
    /// Smallest relative eigenvalue gap found in the ball, and where.
    pub min_relative_gap: f64,
    pub argmin: Vec<f64>,
}

fn ball_points(q: &[f64], radius: f64) -> Vec<Vec<f64>> {
    let n = q.len();
    let per: usize = match n {
        0..=2 => 9,
        3 => 7,
        _ => 5,
    };
    let mut out = vec![q.to_vec()];
    let total = per.pow(n as u32);
    for idx in 0..total {
        let mut rest = idx;
        let mut p = q.to_vec();
        let mut r2 = 0.0;
        for x in p.iter_mut() {
            let k = rest % per;
            rest /= per;
            let t = -1.0 + 2.0 * k as f64 / (per - 1) as f64;
            *x += radius * t;
            r2 += t * t;
        }
        if r2 <= 1.0 + 1e-12 && r2 > 0.0 {
            out.push(p);
        }
    }
    out
}

/// Samples `N` on a grid of the closed ball `|p − q| ≤ radius`, then runs a compass search
/// for the smallest relative eigenvalue gap in the ball, so that isolated coalescence
/// points between grid nodes are found.
pub fn regularity_probe(model: &GeometryModel, q: &[f64], radius: f64) -> Result<RegularityReport, PairError> {
    regularity_probe_with_tol(model, q, radius, CLUSTER_TOL)
}

pub fn regularity_probe_with_tol(
    model: &GeometryModel,
    q: &[f64],
    radius: f64,
    tol: f64,
) -> Result<RegularityReport, PairError> {
    if q.len() != model.dim() {
        return Err(PairError::Argument(format!(
            "point has {} coordinates, model dimension is {}",
            q.len(),
            model.dim()
        )));
    }
    if !(radius >= 0.0) {
        return Err(PairError::Argument("radius must be non-negative".into()));
    }
    let mut ns = std::collections::BTreeSet::new();
    let mut limit_samples = 0;
    let mut best = (f64::INFINITY, q.to_vec());
    let points = ball_points(q, radius);
    for p in &points {
        let (s, limit) = spectrum_or_limit(model, p, tol)?;
        limit_samples += limit as usize;
        ns.insert(s.distinct());
        let g = s.min_relative_gap();
        if g < best.0 {
            best = (g, p.clone());
        }
    }
    if model.rank() > 1 && radius > 0.0 {
        let gap = |p: &[f64]| -> f64 {
            let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 > radius * radius {
                return f64::INFINITY;
            }
            spectrum_or_limit(model, p, tol)
                .map(|(s, _)| s.min_relative_gap())
                .unwrap_or(f64::INFINITY)
        };
        let mut step = radius / 4.0;
        let (mut fbest, mut x) = best.clone();
        while step > radius * 1e-9 && fbest > tol {
            let mut moved = false;
            for k in 0..x.len() {
                for sign in [-1.0, 1.0] {
                    let mut y = x.clone();
                    y[k] += sign * step;
                    let f = gap(&y);
                    if f < fbest {
                        fbest = f;
                        x = y;
                        moved = true;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if fbest < best.0 {
            if let Ok((s, limit)) = spectrum_or_limit(model, &x, tol) {
                ns.insert(s.distinct());
                limit_samples += limit as usize;
            }
            best = (fbest, x);
        }
    }
    Ok(RegularityReport {
        regular: ns.len() == 1,
        n_values: ns.into_iter().collect(),
        samples: points.len(),
        limit_samples,
        min_relative_gap: best.0,
        argmin: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clustering() {
        assert_eq!(cluster(&[1.0, 1.0 + 1e-9, 2.0], 1e-7), vec![vec![0, 1], vec![2]]);
        assert_eq!(cluster(&[1.0], 1e-7), vec![vec![0]]);
    }

    #[test]
    fn diagonal_pair() {
        let g1 = DMatrix::from_diagonal_element(2, 2, 0.5);
        let g2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let s = spectrum_of(&[0.0, 0.0], &g1, &g2, CLUSTER_TOL).unwrap();
        assert!((s.s.clone() - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0])).abs().max() < 1e-14);
        assert!((s.eigenvalues[0] - 2.0).abs() < 1e-14 && (s.eigenvalues[1] - 4.0).abs() < 1e-14);
        let gram = s.eigenvectors.transpose() * &g1 * &s.eigenvectors;
        assert!((gram - DMatrix::identity(2, 2)).abs().max() < 1e-14);
        assert_eq!(s.distinct(), 2);
    }
}
