use nalgebra::DMatrix;

use super::{Frame, GeometryModel, Metric, ModelError};

/// The model frame with its D-part replaced by a Gram–Schmidt orthonormal frame for one
/// metric. Field `i` of the D-part is a combination of model fields `0..=i`.
#[derive(Debug, Clone)]
pub struct OrthonormalFrame {
    model: GeometryModel,
    metric: Metric,
}

pub fn orthonormalize(model: &GeometryModel, metric: Metric) -> OrthonormalFrame {
    OrthonormalFrame {
        model: model.clone(),
        metric,
    }
}

impl OrthonormalFrame {
    /// Coefficients `K` with `X' = X K` on the D-part; `K = L^{-T}` for `G = L L^T`.
    pub fn coefficients_at(&self, q: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        let chol = self.model.gram_cholesky(self.metric, q)?;
        let l = chol.l();
        let m = self.model.rank();
        let linv = l
            .solve_lower_triangular(&DMatrix::identity(m, m))
            .ok_or_else(|| ModelError::NotPositiveDefinite {
                metric: self.metric.tag(),
                q: q.to_vec(),
            })?;
        Ok(linv.transpose())
    }
}

impl Frame for OrthonormalFrame {
    fn matrix_at(&self, q: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        let m = self.model.rank();
        let mut f = self.model.frame_matrix(q)?;
        let k = self.coefficients_at(q)?;
        let d = f.columns(0, m) * k;
        f.columns_mut(0, m).copy_from(&d);
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarExpr;
    use crate::geometry::Domain;

    fn constant_model(g: &[&[f64]]) -> GeometryModel {
        let n = g.len();
        let gram: Vec<Vec<ScalarExpr>> = g
            .iter()
            .map(|r| r.iter().map(|v| ScalarExpr::constant(*v)).collect())
            .collect();
        GeometryModel::with_coordinate_frame(
            (0..n).map(|i| format!("x{i}")).collect(),
            gram.clone(),
            gram,
            Domain::cube(n, 1.0),
        )
        .unwrap()
    }

    fn frame_gram(model: &GeometryModel, f: &DMatrix<f64>, q: &[f64]) -> DMatrix<f64> {
        // coordinate frame: coefficients equal coordinates
        let g = model.gram_matrix(Metric::First, q).unwrap();
        f.transpose() * g * f
    }

    #[test]
    fn scales_first_field() {
        let m = constant_model(&[&[4.0, 0.0], &[0.0, 1.0]]);
        let f = orthonormalize(&m, Metric::First).matrix_at(&[0.0, 0.0]).unwrap();
        assert_eq!(f, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn identity_gram_keeps_frame() {
        let m = constant_model(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let f = orthonormalize(&m, Metric::First).matrix_at(&[0.1, 0.2]).unwrap();
        assert_eq!(f, DMatrix::identity(2, 2));
    }

    #[test]
    fn random_spd_becomes_identity() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.1, 2.0, 0.4, 0.7, -0.5, 1.5]);
        let g = &a * a.transpose() + DMatrix::identity(3, 3) * 0.1;
        let rows: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| g[(i, j)]).collect()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = constant_model(&refs);
        let q = [0.0; 3];
        let f = orthonormalize(&m, Metric::First).matrix_at(&q).unwrap();
        let gram = frame_gram(&m, &f, &q);
        assert!((gram - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-12);
    }
}
