use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Exponent vectors of total degree `degree` in `nvars` variables, in lexicographic order
/// (`u_1^d` first).
pub fn monomials(nvars: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(nvars: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == nvars {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(nvars, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if nvars == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(nvars, degree, &mut Vec::with_capacity(nvars), &mut out);
    out
}

/// Homogeneous polynomial in the quasi-impulses `u_1..u_n` at one base point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberPolynomial {
    nvars: usize,
    degree: u32,
    #[serde(skip)]
    basis: Vec<Vec<u32>>,
    coeffs: Vec<f64>,
}

/// Least-squares division `target ≈ quotient · divisor`.
#[derive(Debug, Clone, Serialize)]
pub struct Division {
    pub quotient: FiberPolynomial,
    /// Coefficient norm of `target − quotient · divisor`.
    pub residual: f64,
    /// `residual / ‖target‖`, zero when the target vanishes.
    pub relative: f64,
}

impl FiberPolynomial {
    pub fn zero(nvars: usize, degree: u32) -> Self {
        let basis = monomials(nvars, degree);
        let len = basis.len();
        FiberPolynomial {
            nvars,
            degree,
            basis,
            coeffs: vec![0.0; len],
        }
    }

    /// Linear form `Σ c_i u_i`.
    pub fn linear(c: &[f64]) -> Self {
        let mut p = FiberPolynomial::zero(c.len(), 1);
        for (i, v) in c.iter().enumerate() {
            p.add_term(&[i], *v);
        }
        p
    }

    /// Quadratic form `uᵀ A u`.
    pub fn quadratic(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let mut p = FiberPolynomial::zero(n, 2);
        for i in 0..n {
            for j in 0..n {
                p.add_term(&[i, j], a[(i, j)]);
            }
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn basis(&self) -> &[Vec<u32>] {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    fn index(&self, exps: &[u32]) -> usize {
        self.basis
            .binary_search_by(|b| exps.cmp(b))
            .expect("exponent vector of the declared degree")
    }

    /// Coefficient of the monomial with exponent vector `exps`.
    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.coeffs[self.index(exps)]
    }

    /// Adds `c · u_{vars[0]} u_{vars[1]} …`; `vars.len()` must equal the degree.
    pub fn add_term(&mut self, vars: &[usize], c: f64) {
        assert_eq!(vars.len() as u32, self.degree, "term degree");
        let mut exps = vec![0u32; self.nvars];
        for v in vars {
            exps[*v] += 1;
        }
        let i = self.index(&exps);
        self.coeffs[i] += c;
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.basis
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| c * e.iter().zip(u).map(|(k, x)| x.powi(*k as i32)).product::<f64>())
            .sum()
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut p = self.clone();
        p.coeffs.iter_mut().for_each(|c| *c *= s);
        p
    }

    pub fn add(&self, other: &FiberPolynomial) -> Self {
        assert_eq!((self.nvars, self.degree), (other.nvars, other.degree));
        let mut p = self.clone();
        for (a, b) in p.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        p
    }

    pub fn sub(&self, other: &FiberPolynomial) -> Self {
        self.add(&other.scaled(-1.0))
    }

    pub fn mul(&self, other: &FiberPolynomial) -> Self {
        assert_eq!(self.nvars, other.nvars);
        let mut p = FiberPolynomial::zero(self.nvars, self.degree + other.degree);
        for (ea, ca) in self.basis.iter().zip(&self.coeffs) {
            if *ca == 0.0 {
                continue;
            }
            for (eb, cb) in other.basis.iter().zip(&other.coeffs) {
                if *cb == 0.0 {
                    continue;
                }
                let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                let i = p.index(&e);
                p.coeffs[i] += ca * cb;
            }
        }
        p
    }

    /// Least-squares quotient over all homogeneous polynomials of degree
    /// `self.degree − divisor.degree`.
    pub fn divide(&self, divisor: &FiberPolynomial) -> Division {
        assert_eq!(self.nvars, divisor.nvars);
        assert!(divisor.degree <= self.degree, "divisor degree exceeds dividend degree");
        let qdeg = self.degree - divisor.degree;
        let qbasis = monomials(self.nvars, qdeg);
        let rows = self.coeffs.len();
        let mut a = DMatrix::zeros(rows, qbasis.len());
        for (col, e) in qbasis.iter().enumerate() {
            let mut mono = FiberPolynomial::zero(self.nvars, qdeg);
            let i = mono.index(e);
            mono.coeffs[i] = 1.0;
            let prod = mono.mul(divisor);
            a.set_column(col, &DVector::from_column_slice(&prod.coeffs));
        }
        let b = DVector::from_column_slice(&self.coeffs);
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let x = svd
            .solve(&b, 1e-12 * smax.max(f64::MIN_POSITIVE))
            .unwrap_or_else(|_| DVector::zeros(qbasis.len()));
        let residual = (&a * &x - &b).norm();
        let tn = self.norm();
        let mut quotient = FiberPolynomial::zero(self.nvars, qdeg);
        quotient.coeffs.copy_from_slice(x.as_slice());
        Division {
            quotient,
            residual,
            relative: if tn > 0.0 { residual / tn } else { 0.0 },
        }
    }
}
