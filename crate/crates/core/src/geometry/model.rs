use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use super::field::{lie_bracket, VectorField};
use super::{Domain, Metric, ModelError};
use crate::expr::ScalarExpr;

/// Frame, distribution and metric pair on one chart.
#[derive(Clone)]
pub struct GeometryModel {
    coords: Vec<String>,
    rank: usize,
    frame: Vec<VectorField>,
    grams: [Vec<Vec<ScalarExpr>>; 2],
    domain: Domain,
    derived: Arc<OnceLock<Derived>>,
}

/// Symbolic derivatives shared by all clones of a model.
struct Derived {
    /// `frame[i][a][k] = ∂_k (X_i)^a`
    frame: Vec<Vec<Vec<ScalarExpr>>>,
    /// `grams[t][a][b][k] = ∂_k G_t(a, b)`
    grams: [Vec<Vec<Vec<ScalarExpr>>>; 2],
    /// `brackets[i * n + j] = [X_i, X_j]`
    brackets: Vec<VectorField>,
}

const DET_TOL: f64 = 1e-10;
const SYM_TOL: f64 = 1e-10;

impl std::fmt::Debug for GeometryModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeometryModel")
            .field("coords", &self.coords)
            .field("rank", &self.rank)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl GeometryModel {
    /// Builds a model after checking shapes. Call [`validate`](Self::validate) for the
    /// pointwise checks on the probe grid.
    pub fn new(
        coords: Vec<String>,
        rank: usize,
        frame: Vec<VectorField>,
        gram1: Vec<Vec<ScalarExpr>>,
        gram2: Vec<Vec<ScalarExpr>>,
        domain: Domain,
    ) -> Result<Self, ModelError> {
        let n = coords.len();
        if n == 0 {
            return Err(ModelError::invalid("coords", "at least one coordinate is required"));
        }
        if rank == 0 || rank > n {
            return Err(ModelError::invalid("rank", format!("must lie in 1..={n}, found {rank}")));
        }
        if frame.len() != n {
            return Err(ModelError::invalid(
                "frame",
                format!("expected {n} fields, found {}", frame.len()),
            ));
        }
        for (i, f) in frame.iter().enumerate() {
            if f.dim() != n {
                return Err(ModelError::invalid(
                    format!("frame[{i}]"),
                    format!("expected {n} components, found {}", f.dim()),
                ));
            }
        }
        for (name, g) in [("gram1", &gram1), ("gram2", &gram2)] {
            if g.len() != rank {
                return Err(ModelError::invalid(
                    name,
                    format!("expected {rank} rows, found {}", g.len()),
                ));
            }
            for (a, row) in g.iter().enumerate() {
                if row.len() != rank {
                    return Err(ModelError::invalid(
                        format!("{name}[{a}]"),
                        format!("expected {rank} entries, found {}", row.len()),
                    ));
                }
            }
        }
        domain.validate(n)?;
        Ok(GeometryModel {
            coords,
            rank,
            frame,
            grams: [gram1, gram2],
            domain,
            derived: Arc::new(OnceLock::new()),
        })
    }

    /// Riemannian or sub-Riemannian pair on the coordinate frame.
    pub fn with_coordinate_frame(
        coords: Vec<String>,
        gram1: Vec<Vec<ScalarExpr>>,
        gram2: Vec<Vec<ScalarExpr>>,
        domain: Domain,
    ) -> Result<Self, ModelError> {
        let n = coords.len();
        let frame = (0..n).map(|k| VectorField::coordinate(n, k)).collect();
        GeometryModel::new(coords, n, frame, gram1, gram2, domain)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn corank(&self) -> usize {
        self.dim() - self.rank
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn coord_refs(&self) -> Vec<&str> {
        self.coords.iter().map(String::as_str).collect()
    }

    pub fn frame(&self) -> &[VectorField] {
        &self.frame
    }

    pub fn gram(&self, metric: Metric) -> &[Vec<ScalarExpr>] {
        &self.grams[metric.index()]
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Same model with `G1` and `G2` exchanged.
    pub fn swapped(&self) -> GeometryModel {
        GeometryModel {
            coords: self.coords.clone(),
            rank: self.rank,
            frame: self.frame.clone(),
            grams: [self.grams[1].clone(), self.grams[0].clone()],
            domain: self.domain.clone(),
            derived: Arc::new(OnceLock::new()),
        }
    }

    /// Same model with a different second metric.
    pub fn with_gram2(&self, gram2: Vec<Vec<ScalarExpr>>) -> Result<GeometryModel, ModelError> {
        GeometryModel::new(
            self.coords.clone(),
            self.rank,
            self.frame.clone(),
            self.grams[0].clone(),
            gram2,
            self.domain.clone(),
        )
    }

    /// Same model with `G2` multiplied by a constant.
    pub fn scale_gram2(&self, c: f64) -> GeometryModel {
        let g2 = self.grams[1]
            .iter()
            .map(|row| row.iter().map(|e| c * e).collect())
            .collect();
        self.with_gram2(g2).expect("scaling keeps shapes")
    }

    pub fn with_domain(&self, domain: Domain) -> Result<GeometryModel, ModelError> {
        GeometryModel::new(
            self.coords.clone(),
            self.rank,
            self.frame.clone(),
            self.grams[0].clone(),
            self.grams[1].clone(),
            domain,
        )
    }

    fn derived(&self) -> &Derived {
        self.derived.get_or_init(|| {
            let n = self.dim();
            let frame = self
                .frame
                .iter()
                .map(|f| f.components().iter().map(|c| c.gradient(n)).collect())
                .collect();
            let grams = [0, 1].map(|t| {
                self.grams[t]
                    .iter()
                    .map(|row| row.iter().map(|e| e.gradient(n)).collect())
                    .collect()
            });
            let mut brackets = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    brackets.push(if i == j {
                        VectorField::zero(n)
                    } else {
                        lie_bracket(&self.frame[i], &self.frame[j])
                    });
                }
            }
            Derived {
                frame,
                grams,
                brackets,
            }
        })
    }

    /// `[X_i, X_j]` as a symbolic field.
    pub fn bracket(&self, i: usize, j: usize) -> &VectorField {
        &self.derived().brackets[i * self.dim() + j]
    }

    fn eval(&self, e: &ScalarExpr, q: &[f64]) -> Result<f64, ModelError> {
        e.eval(q).map_err(|err| ModelError::eval(q, err))
    }

    /// Column `i` is `X_i(q)`.
    pub fn frame_matrix(&self, q: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        let n = self.dim();
        let mut f = DMatrix::zeros(n, n);
        for (i, field) in self.frame.iter().enumerate() {
            for (a, c) in field.components().iter().enumerate() {
                f[(a, i)] = self.eval(c, q)?;
            }
        }
        Ok(f)
    }

    /// `∂_k` of the frame matrix, for each `k`.
    pub fn frame_partials(&self, q: &[f64]) -> Result<Vec<DMatrix<f64>>, ModelError> {
        let n = self.dim();
        let d = &self.derived().frame;
        let mut out = vec![DMatrix::zeros(n, n); n];
        for i in 0..n {
            for a in 0..n {
                for (k, m) in out.iter_mut().enumerate() {
                    let e = &d[i][a][k];
                    if !e.is_zero() {
                        m[(a, i)] = self.eval(e, q)?;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix of the chosen metric on the D-part of the frame, symmetrised from the
    /// upper triangle.
    pub fn gram_matrix(&self, metric: Metric, q: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        let m = self.rank;
        let g = &self.grams[metric.index()];
        let mut out = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let v = self.eval(&g[a][b], q)?;
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        Ok(out)
    }

    pub fn gram_partials(&self, metric: Metric, q: &[f64]) -> Result<Vec<DMatrix<f64>>, ModelError> {
        let m = self.rank;
        let n = self.dim();
        let d = &self.derived().grams[metric.index()];
        let mut out = vec![DMatrix::zeros(m, m); n];
        for a in 0..m {
            for b in a..m {
                for (k, mat) in out.iter_mut().enumerate() {
                    let e = &d[a][b][k];
                    if !e.is_zero() {
                        let v = self.eval(e, q)?;
                        mat[(a, b)] = v;
                        mat[(b, a)] = v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `[X_i, X_j](q)` for all pairs, indexed `i * n + j`.
    pub fn bracket_values(&self, q: &[f64]) -> Result<Vec<DVector<f64>>, ModelError> {
        self.derived()
            .brackets
            .iter()
            .map(|b| b.eval(q).map_err(|e| ModelError::eval(q, e)))
            .collect()
    }

    /// Cholesky factor of the Gram matrix, or a positivity error.
    pub fn gram_cholesky(&self, metric: Metric, q: &[f64]) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>, ModelError> {
        let g = self.gram_matrix(metric, q)?;
        g.cholesky().ok_or_else(|| ModelError::NotPositiveDefinite {
            metric: metric.tag(),
            q: q.to_vec(),
        })
    }

    /// Pointwise checks on the probe grid: every entry evaluates, the frame is
    /// independent, and both Gram matrices are symmetric and positive definite.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.dim();
        let m = self.rank;
        for q in self.domain.probe_points(0) {
            let mut f = DMatrix::zeros(n, n);
            for (i, field) in self.frame.iter().enumerate() {
                for (a, c) in field.components().iter().enumerate() {
                    f[(a, i)] = c.eval(&q).map_err(|e| {
                        ModelError::invalid(format!("frame[{i}][{a}]"), format!("{e} at q = {q:?}"))
                    })?;
                }
            }
            let col_norms: f64 = f.column_iter().map(|c| c.norm()).product();
            if col_norms == 0.0 || f.determinant().abs() <= DET_TOL * col_norms {
                return Err(ModelError::invalid(
                    "frame",
                    format!("fields are linearly dependent at q = {q:?}"),
                ));
            }
            for (t, name) in [(0, "gram1"), (1, "gram2")] {
                let mut g = DMatrix::zeros(m, m);
                for a in 0..m {
                    for b in 0..m {
                        g[(a, b)] = self.grams[t][a][b].eval(&q).map_err(|e| {
                            ModelError::invalid(format!("{name}[{a}][{b}]"), format!("{e} at q = {q:?}"))
                        })?;
                    }
                }
                for a in 0..m {
                    for b in a + 1..m {
                        let (x, y) = (g[(a, b)], g[(b, a)]);
                        if (x - y).abs() > SYM_TOL * x.abs().max(y.abs()).max(1.0) {
                            return Err(ModelError::invalid(
                                format!("{name}[{b}][{a}]"),
                                format!("not symmetric at q = {q:?} ({x} vs {y})"),
                            ));
                        }
                    }
                }
                if g.cholesky().is_none() {
                    return Err(ModelError::invalid(
                        name,
                        format!("not positive definite at q = {q:?}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn exprs(rows: &[&[&str]], c: &[&str]) -> Vec<Vec<ScalarExpr>> {
        rows.iter()
            .map(|r| r.iter().map(|s| parse(s, c).unwrap()).collect())
            .collect()
    }

    #[test]
    fn detects_indefinite_gram() {
        let c = ["x", "y"];
        let m = GeometryModel::with_coordinate_frame(
            vec!["x".into(), "y".into()],
            exprs(&[&["1", "0"], &["0", "1"]], &c),
            exprs(&[&["1", "0"], &["0", "x"]], &c),
            Domain::cube(2, 1.0),
        )
        .unwrap();
        match m.validate() {
            Err(ModelError::Invalid { path, .. }) => assert_eq!(path, "gram2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_asymmetric_gram() {
        let c = ["x", "y"];
        let m = GeometryModel::with_coordinate_frame(
            vec!["x".into(), "y".into()],
            exprs(&[&["2", "x"], &["0", "2"]], &c),
            exprs(&[&["1", "0"], &["0", "1"]], &c),
            Domain::cube(2, 1.0),
        )
        .unwrap();
        match m.validate() {
            Err(ModelError::Invalid { path, .. }) => assert_eq!(path, "gram1[1][0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partials_match_symbols() {
        let c = ["x", "y"];
        let m = GeometryModel::with_coordinate_frame(
            vec!["x".into(), "y".into()],
            exprs(&[&["1 + x*x", "0"], &["0", "1"]], &c),
            exprs(&[&["1", "0"], &["0", "exp(y)"]], &c),
            Domain::cube(2, 1.0),
        )
        .unwrap();
        m.validate().unwrap();
        let d1 = m.gram_partials(Metric::First, &[0.5, 0.0]).unwrap();
        assert_eq!(d1[0][(0, 0)], 1.0);
        assert_eq!(d1[1][(0, 0)], 0.0);
        let d2 = m.gram_partials(Metric::Second, &[0.5, 0.0]).unwrap();
        assert_eq!(d2[1][(1, 1)], 1.0);
    }
}
