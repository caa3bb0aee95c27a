use nalgebra::{DMatrix, DVector};

use super::{frame_solve, GeometryModel, ModelError};

/// Structure functions of a frame at one point: `[X_i, X_j] = Σ_k c_{ji}^k X_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureTensor {
    n: usize,
    data: Vec<f64>,
}

impl StructureTensor {
    pub fn zeros(n: usize) -> Self {
        StructureTensor {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    /// From bracket coefficient vectors: `coeffs[i * n + j]` holds the coefficients of
    /// `[X_i, X_j]` in the frame.
    pub fn from_bracket_coefficients(n: usize, coeffs: &[DVector<f64>]) -> Self {
        let mut c = StructureTensor::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c.set(j, i, k, coeffs[i * n + j][k]);
                }
            }
        }
        c
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `c_{ji}^k`.
    pub fn get(&self, j: usize, i: usize, k: usize) -> f64 {
        self.data[(j * self.n + i) * self.n + k]
    }

    pub fn set(&mut self, j: usize, i: usize, k: usize, v: f64) {
        let n = self.n;
        self.data[(j * n + i) * n + k] = v;
    }

    /// Largest `|c_{ji}^k + c_{ij}^k|`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    r = r.max((self.get(j, i, k) + self.get(i, j, k)).abs());
                }
            }
        }
        r
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Structure functions of a model's frame, evaluated on demand.
#[derive(Debug, Clone, Copy)]
pub struct StructureFunctions<'a> {
    model: &'a GeometryModel,
}

pub fn structure_functions(model: &GeometryModel) -> StructureFunctions<'_> {
    StructureFunctions { model }
}

impl StructureFunctions<'_> {
    pub fn at(&self, q: &[f64]) -> Result<StructureTensor, ModelError> {
        let n = self.model.dim();
        let f = self.model.frame_matrix(q)?;
        let brackets = self.model.bracket_values(q)?;
        let mut rhs = DMatrix::zeros(n, n * n);
        for (col, b) in brackets.iter().enumerate() {
            rhs.set_column(col, b);
        }
        let sol = frame_solve(&f, &rhs, q)?;
        let coeffs: Vec<DVector<f64>> = sol.column_iter().map(|c| c.into_owned()).collect();
        Ok(StructureTensor::from_bracket_coefficients(n, &coeffs))
    }

    /// Largest component of the cyclic Jacobi sum at `q`. Derivatives of the structure
    /// functions along the frame are taken by a five-point stencil of width `step`.
    pub fn jacobi_residual(&self, q: &[f64], step: f64) -> Result<f64, ModelError> {
        let n = self.model.dim();
        let c = self.at(q)?;
        let f = self.model.frame_matrix(q)?;
        let mut dc = Vec::with_capacity(n);
        for i in 0..n {
            let dir = f.column(i);
            let shifted = |s: f64| -> Result<StructureTensor, ModelError> {
                let p: Vec<f64> = q.iter().enumerate().map(|(a, x)| x + s * dir[a]).collect();
                self.at(&p)
            };
            let (m2, m1, p1, p2) = (shifted(-2.0 * step)?, shifted(-step)?, shifted(step)?, shifted(2.0 * step)?);
            let mut d = StructureTensor::zeros(n);
            for idx in 0..d.data.len() {
                d.data[idx] = (m2.data[idx] - 8.0 * m1.data[idx] + 8.0 * p1.data[idx] - p2.data[idx]) / (12.0 * step);
            }
            dc.push(d);
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        for (a, b, cc) in [(i, j, k), (j, k, i), (k, i, j)] {
                            s += dc[a].get(cc, b, l);
                            for p in 0..n {
                                s += c.get(cc, b, p) * c.get(p, a, l);
                            }
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}
