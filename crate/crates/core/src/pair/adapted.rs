use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::spectrum::{regularity_probe_with_tol, transition_operator_with_tol, CLUSTER_TOL};
use super::PairError;
use crate::geometry::{frame_solve, structure_functions, Frame, GeometryModel, Metric, ModelError, StructureTensor};

/// Step of the five-point stencil for frame-coefficient derivatives.
const FD_STEP: f64 = 5e-4;

/// Frame adapted to `(G1, G2)` near a regular point: G1-orthonormal eigenfields of the
/// transition operator on `D`, completed by the model's transverse fields.
///
/// At each point the eigenvectors chosen at the center are projected onto the local
/// eigenspaces and re-orthonormalised, which gives a smooth frame for as long as the
/// cluster structure of the spectrum does not change.
#[derive(Debug, Clone)]
pub struct AdaptedFrame {
    model: GeometryModel,
    center: Vec<f64>,
    reference: DMatrix<f64>,
    sizes: Vec<usize>,
    tol: f64,
}

/// Everything the fiber polynomials need at one point of an adapted frame.
#[derive(Debug, Clone, Serialize)]
pub struct AdaptedPoint {
    pub q: Vec<f64>,
    /// Coefficients of `X_1..X_m` on the model D-frame (columns).
    #[serde(serialize_with = "super::spectrum::ser_matrix")]
    pub e: DMatrix<f64>,
    /// `α_i²`.
    pub alpha2: Vec<f64>,
    /// Coordinate components of the full adapted frame (columns).
    #[serde(serialize_with = "super::spectrum::ser_matrix")]
    pub frame: DMatrix<f64>,
    /// `d_alpha2[(k, i)] = X_k(α_i²)` for `k < n`, `i < m`.
    #[serde(serialize_with = "super::spectrum::ser_matrix")]
    pub d_alpha2: DMatrix<f64>,
    pub clusters: Vec<Vec<usize>>,
    /// Structure functions of `(X_1..X_n)`.
    #[serde(skip)]
    pub c: StructureTensor,
    /// Structure functions of `(X_1/α_1, …, X_m/α_m, X_{m+1}, …, X_n)`.
    #[serde(skip)]
    pub cbar: StructureTensor,
}

impl AdaptedPoint {
    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn rank(&self) -> usize {
        self.alpha2.len()
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.alpha2[i].sqrt()
    }

    /// `α_i` for `i < m`, 1 on the transverse fields.
    pub fn alpha_ext(&self, i: usize) -> f64 {
        if i < self.rank() {
            self.alpha(i)
        } else {
            1.0
        }
    }

    pub fn same_cluster(&self, i: usize, j: usize) -> bool {
        self.clusters.iter().any(|c| c.contains(&i) && c.contains(&j))
    }

    /// `u = F_Xᵀ p`.
    pub fn quasi_impulses(&self, p: &[f64]) -> Vec<f64> {
        (self.frame.transpose() * DVector::from_column_slice(p)).iter().copied().collect()
    }

    /// Covector with the given quasi-impulses.
    pub fn covector(&self, u: &[f64]) -> Result<Vec<f64>, ModelError> {
        let ft = self.frame.transpose();
        let b = DMatrix::from_column_slice(u.len(), 1, u);
        let p = frame_solve(&ft, &b, &self.q)?;
        Ok(p.column(0).iter().copied().collect())
    }
}

/// Builds an adapted frame centred at `center` after checking that the closed ball of the
/// given radius contains only regular points.
pub fn adapted_frame(model: &GeometryModel, center: &[f64], radius: f64) -> Result<AdaptedFrame, PairError> {
    let report = regularity_probe_with_tol(model, center, radius, CLUSTER_TOL)?;
    if !report.regular {
        return Err(PairError::NonRegular {
            q: report.argmin,
            n_values: report.n_values,
        });
    }
    AdaptedFrame::new(model, center)
}

impl AdaptedFrame {
    pub fn new(model: &GeometryModel, center: &[f64]) -> Result<AdaptedFrame, PairError> {
        AdaptedFrame::with_tol(model, center, CLUSTER_TOL)
    }

    pub fn with_tol(model: &GeometryModel, center: &[f64], tol: f64) -> Result<AdaptedFrame, PairError> {
        let s = transition_operator_with_tol(model, center, tol)?;
        let (n, m) = (model.dim(), model.rank());
        if n == m + 1 {
            let c = structure_functions(model).at(center)?;
            let mut top: f64 = 0.0;
            for i in 0..m {
                for j in 0..m {
                    top = top.max(c.get(j, i, m).abs());
                }
            }
            if top <= 1e-12 {
                return Err(PairError::DegenerateCompletion { q: center.to_vec() });
            }
        }
        Ok(AdaptedFrame {
            model: model.clone(),
            center: center.to_vec(),
            reference: s.eigenvectors.clone(),
            sizes: s.cluster_sizes(),
            tol,
        })
    }

    pub fn model(&self) -> &GeometryModel {
        &self.model
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// D-part coefficients `E`, eigenvalues and clusters at `q`.
    fn d_part(&self, q: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>, Vec<Vec<usize>>), PairError> {
        let s = transition_operator_with_tol(&self.model, q, self.tol)?;
        if s.cluster_sizes() != self.sizes {
            return Err(PairError::Crossing {
                q: q.to_vec(),
                expected: self.sizes.clone(),
                found: s.cluster_sizes(),
            });
        }
        let g1 = self.model.gram_matrix(Metric::First, q)?;
        let g2 = self.model.gram_matrix(Metric::Second, q)?;
        let m = self.model.rank();
        let mut e = DMatrix::zeros(m, m);
        let mut alpha2 = vec![0.0; m];
        for cl in &s.clusters {
            let vs = s.eigenvectors.select_columns(cl);
            let proj = &vs * vs.transpose() * &g1;
            for (pos, &i) in cl.iter().enumerate() {
                let mut v = &proj * self.reference.column(i);
                for &j in &cl[..pos] {
                    let ej = e.column(j).into_owned();
                    let d = (ej.transpose() * &g1 * &v)[0];
                    v -= ej * d;
                }
                let norm = (v.transpose() * &g1 * &v)[0].sqrt();
                if !(norm > 1e-6) {
                    return Err(PairError::FrameDegenerate { q: q.to_vec() });
                }
                v /= norm;
                alpha2[i] = (v.transpose() * &g2 * &v)[0];
                e.set_column(i, &v);
            }
        }
        Ok((e, alpha2, s.clusters))
    }

    fn full(&self, e: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.model.dim();
        let m = self.model.rank();
        let mut full = DMatrix::identity(n, n);
        full.view_mut((0, 0), (m, m)).copy_from(e);
        full
    }

    /// Adapted frame and its first-order data at `q`.
    pub fn at(&self, q: &[f64]) -> Result<AdaptedPoint, PairError> {
        let n = self.model.dim();
        let m = self.model.rank();
        let (e, alpha2, clusters) = self.d_part(q)?;
        let fy = self.model.frame_matrix(q)?;
        let ehat = self.full(&e);
        let fx = &fy * &ehat;

        let dg1 = self.model.gram_partials(Metric::First, q)?;
        let dg2 = self.model.gram_partials(Metric::Second, q)?;
        let mut d_alpha2 = DMatrix::zeros(n, m);
        for k in 0..n {
            let mut v1 = DMatrix::zeros(m, m);
            let mut v2 = DMatrix::zeros(m, m);
            for a in 0..n {
                v1 += &dg1[a] * fx[(a, k)];
                v2 += &dg2[a] * fx[(a, k)];
            }
            for i in 0..m {
                let ei = e.column(i);
                d_alpha2[(k, i)] = (ei.transpose() * (&v2 - &v1 * alpha2[i]) * ei)[0];
            }
        }

        // X_i(Ê) by a five-point stencil along the integral line of X_i
        let mut de = Vec::with_capacity(n);
        for i in 0..n {
            let dir = fx.column(i);
            let h = FD_STEP / dir.norm().max(1.0);
            let at = |s: f64| -> Result<DMatrix<f64>, PairError> {
                let p: Vec<f64> = q.iter().enumerate().map(|(a, x)| x + s * dir[a]).collect();
                Ok(self.d_part(&p)?.0)
            };
            let d = (at(-2.0 * h)? - at(-h)? * 8.0 + at(h)? * 8.0 - at(2.0 * h)?) / (12.0 * h);
            let mut full = DMatrix::zeros(n, n);
            full.view_mut((0, 0), (m, m)).copy_from(&d);
            de.push(full);
        }

        let brackets = self.model.bracket_values(q)?;
        let mut rhs = DMatrix::zeros(n, n * n);
        for i in 0..n {
            for j in 0..n {
                let mut w = DVector::zeros(n);
                for a in 0..n {
                    for b in 0..n {
                        let coef = ehat[(a, i)] * ehat[(b, j)];
                        if coef != 0.0 {
                            w += &brackets[a * n + b] * coef;
                        }
                    }
                }
                w += &fy * (de[i].column(j) - de[j].column(i));
                rhs.set_column(i * n + j, &w);
            }
        }
        let sol = frame_solve(&fx, &rhs, q)?;
        let coeffs: Vec<DVector<f64>> = sol.column_iter().map(|col| col.into_owned()).collect();
        let c = StructureTensor::from_bracket_coefficients(n, &coeffs);

        let alpha_ext = |k: usize| if k < m { alpha2[k].sqrt() } else { 1.0 };
        // X_i(1/α_j), zero on the transverse fields
        let d_inv = |i: usize, j: usize| -> f64 {
            if j < m {
                -d_alpha2[(i, j)] / (2.0 * alpha2[j].powf(1.5))
            } else {
                0.0
            }
        };
        let mut cbar = StructureTensor::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = c.get(j, i, k) * alpha_ext(k) / (alpha_ext(i) * alpha_ext(j));
                    if k == j {
                        v += alpha_ext(j) / alpha_ext(i) * d_inv(i, j);
                    }
                    if k == i {
                        v -= alpha_ext(i) / alpha_ext(j) * d_inv(j, i);
                    }
                    cbar.set(j, i, k, v);
                }
            }
        }

        Ok(AdaptedPoint {
            q: q.to_vec(),
            e,
            alpha2,
            frame: fx,
            d_alpha2,
            clusters,
            c,
            cbar,
        })
    }
}

impl Frame for AdaptedFrame {
    fn matrix_at(&self, q: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        let (e, _, _) = self.d_part(q).map_err(|err| match err {
            PairError::Model(e) => e,
            other => ModelError::invalid("adapted frame", other.to_string()),
        })?;
        Ok(self.model.frame_matrix(q)? * self.full(&e))
    }
}
