use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{AdaptedPoint, FiberPolynomial, PairError};
use crate::geometry::{GeometryModel, Metric, ModelError};

/// Default relative threshold for the divisibility checks.
pub const DIVISIBILITY_TOL: f64 = 1e-8;

/// Absolute floor, relative to `‖𝒫‖`, under which a remainder counts as rounding noise.
const NOISE_FLOOR: f64 = 1e-10;

/// `𝒫 = Σ α_i² u_i²`.
pub fn fiber_p(pt: &AdaptedPoint) -> FiberPolynomial {
    let mut p = FiberPolynomial::zero(pt.dim(), 2);
    for i in 0..pt.rank() {
        p.add_term(&[i, i], pt.alpha2[i]);
    }
    p
}

/// `h⃗₁(𝒫)` expanded through the structure functions and the derivatives of `α_j²`.
pub fn fiber_hp(pt: &AdaptedPoint) -> FiberPolynomial {
    let n = pt.dim();
    let m = pt.rank();
    let mut p = FiberPolynomial::zero(n, 3);
    for i in 0..m {
        for j in 0..m {
            p.add_term(&[i, j, j], pt.d_alpha2[(i, j)]);
            for k in 0..n {
                p.add_term(&[i, j, k], 2.0 * pt.c.get(j, i, k) * pt.alpha2[j]);
            }
        }
    }
    p
}

/// `𝒫(q, p) = ‖G1♯(p|_D)‖²_{G2}`, evaluated without an adapted frame.
pub fn p_intrinsic(model: &GeometryModel, q: &[f64], p: &[f64]) -> Result<f64, ModelError> {
    let m = model.rank();
    let f = model.frame_matrix(q)?;
    let pd = f.columns(0, m).transpose() * DVector::from_column_slice(p);
    let w = model.gram_cholesky(Metric::First, q)?.solve(&pd);
    let g2 = model.gram_matrix(Metric::Second, q)?;
    Ok((w.transpose() * g2 * &w)[0])
}

/// `h⃗₁(𝒫)` from the Poisson bracket of `h₁ = ½ pᵀHp` and `𝒫 = pᵀKp`, using exact
/// derivatives of the model's frame and Gram entries, written in the quasi-impulses of
/// the adapted frame at `pt`.
pub fn fiber_hp_intrinsic(model: &GeometryModel, pt: &AdaptedPoint) -> Result<FiberPolynomial, PairError> {
    let q = &pt.q;
    let n = model.dim();
    let m = model.rank();
    let f = model.frame_matrix(q)?;
    let y = f.columns(0, m).into_owned();
    let dy = model.frame_partials(q)?;
    let g1 = model.gram_matrix(Metric::First, q)?;
    let g2 = model.gram_matrix(Metric::Second, q)?;
    let dg1 = model.gram_partials(Metric::First, q)?;
    let dg2 = model.gram_partials(Metric::Second, q)?;
    let g1inv = g1
        .clone()
        .try_inverse()
        .ok_or_else(|| ModelError::NotPositiveDefinite { metric: 1, q: q.clone() })?;
    let mm = &g1inv * &g2 * &g1inv;
    let h = &y * &g1inv * y.transpose();
    let k = &y * &mm * y.transpose();
    let b = pt
        .frame
        .transpose()
        .try_inverse()
        .ok_or_else(|| ModelError::SingularFrame { q: q.clone() })?;
    let hb = &h * &b;
    let kb = &k * &b;
    let mut total = FiberPolynomial::zero(n, 3);
    for a in 0..n {
        let dya = dy[a].columns(0, m).into_owned();
        let dn = -(&g1inv * &dg1[a] * &g1inv);
        let dm = &dn * &g2 * &g1inv + &g1inv * &dg2[a] * &g1inv + &g1inv * &g2 * &dn;
        let dh = &dya * &g1inv * y.transpose() + &y * &dn * y.transpose() + &y * &g1inv * dya.transpose();
        let dk = &dya * &mm * y.transpose() + &y * &dm * y.transpose() + &y * &mm * dya.transpose();
        let hu = FiberPolynomial::linear(hb.row(a).transpose().as_slice());
        let ku = FiberPolynomial::linear(kb.row(a).transpose().as_slice());
        let dku = FiberPolynomial::quadratic(&(b.transpose() * dk * &b));
        let dhu = FiberPolynomial::quadratic(&(b.transpose() * dh * &b));
        total = total.add(&hu.mul(&dku)).sub(&dhu.mul(&ku));
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct FirstDivisibility {
    pub holds: bool,
    /// Coefficients `p_i` of the linear quotient.
    pub quotient: Vec<f64>,
    /// `‖h⃗₁(𝒫) − L·𝒫‖ / ‖h⃗₁(𝒫)‖`.
    pub residual: f64,
    pub absolute_residual: f64,
    pub hp_norm: f64,
    /// Largest `|p_i − X_i(α_i²)/α_i²|`, `i ≤ m`.
    pub quotient_check: f64,
    /// Relative mismatch between the intrinsic and the structure-function forms of `h⃗₁(𝒫)`.
    pub expansion_mismatch: f64,
}

pub fn first_divisibility(model: &GeometryModel, pt: &AdaptedPoint, tol: f64) -> Result<FirstDivisibility, PairError> {
    let p = fiber_p(pt);
    let hp = fiber_hp_intrinsic(model, pt)?;
    let expanded = fiber_hp(pt);
    let div = hp.divide(&p);
    let hp_norm = hp.norm();
    let holds = div.residual <= tol * hp_norm + NOISE_FLOOR * p.norm();
    let quotient = div.quotient.coefficients().to_vec();
    let basis = div.quotient.basis();
    let mut coef = vec![0.0; pt.dim()];
    for (e, c) in basis.iter().zip(&quotient) {
        let i = e.iter().position(|x| *x == 1).expect("linear monomial");
        coef[i] = *c;
    }
    let quotient_check = (0..pt.rank())
        .map(|i| (coef[i] - pt.d_alpha2[(i, i)] / pt.alpha2[i]).abs())
        .fold(0.0, f64::max);
    let scale = hp_norm.max(expanded.norm()).max(NOISE_FLOOR * p.norm());
    Ok(FirstDivisibility {
        holds,
        quotient: coef,
        residual: div.relative,
        absolute_residual: div.residual,
        hp_norm,
        quotient_check,
        expansion_mismatch: if scale > 0.0 { hp.sub(&expanded).norm() / scale } else { 0.0 },
    })
}

/// `R_j` in its expanded form, valid under the first divisibility condition.
pub fn fiber_r_expanded(pt: &AdaptedPoint, j: usize) -> FiberPolynomial {
    let n = pt.dim();
    let m = pt.rank();
    let a2 = &pt.alpha2;
    let mut r = FiberPolynomial::zero(n, 2);
    for i in 0..m {
        if i == j {
            continue;
        }
        r.add_term(&[i, i], (a2[j] - a2[i]) * pt.c.get(j, i, i) - 0.5 * pt.d_alpha2[(j, i)]);
        // X_i(α_j⁴/α_i²)
        let d = 2.0 * a2[j] * pt.d_alpha2[(i, j)] / a2[i] - a2[j] * a2[j] * pt.d_alpha2[(i, i)] / (a2[i] * a2[i]);
        r.add_term(&[i, j], a2[i] / (2.0 * a2[j]) * d);
    }
    for i in 0..m {
        for k in 0..m {
            if i != k {
                r.add_term(&[i, k], (a2[j] - a2[k]) * pt.c.get(j, i, k));
            }
        }
        for k in m..n {
            r.add_term(&[i, k], a2[j] * pt.c.get(j, i, k));
        }
    }
    r
}

/// `R_j` at `u` from its definition, with `h⃗₁(𝒫)/𝒫` evaluated pointwise.
pub fn r_direct(pt: &AdaptedPoint, hp: &FiberPolynomial, u: &[f64], j: usize) -> f64 {
    let n = pt.dim();
    let m = pt.rank();
    let a2 = &pt.alpha2;
    let pval: f64 = (0..m).map(|i| a2[i] * u[i] * u[i]).sum();
    let h_alpha: f64 = (0..m).map(|i| u[i] * pt.d_alpha2[(i, j)]).sum();
    let mut h_u = 0.0;
    let mut bar = 0.0;
    for i in 0..m {
        for k in 0..n {
            h_u += pt.c.get(j, i, k) * u[i] * u[k];
        }
        for k in 0..m {
            bar += pt.cbar.get(j, i, k) * pt.alpha(i) * pt.alpha(j) * pt.alpha(k) * u[i] * u[k];
        }
    }
    0.5 * h_alpha * u[j] + a2[j] * h_u - 0.5 * a2[j] * u[j] * hp.eval(u) / pval - bar
}

/// `Q_jk = Σ_{i ≤ m} c̄_{ji}^k α_i u_i`.
pub fn fiber_q(pt: &AdaptedPoint, j: usize, k: usize) -> FiberPolynomial {
    let mut c = vec![0.0; pt.dim()];
    for (i, ci) in c.iter_mut().enumerate().take(pt.rank()) {
        *ci = pt.cbar.get(j, i, k) * pt.alpha(i);
    }
    FiberPolynomial::linear(&c)
}

/// `R_j` after checking the first divisibility condition, which its expanded form presumes.
pub fn fiber_r(model: &GeometryModel, pt: &AdaptedPoint, j: usize) -> Result<FiberPolynomial, PairError> {
    if j >= pt.rank() {
        return Err(PairError::Argument(format!("index {j} is not a D-index")));
    }
    let first = first_divisibility(model, pt, DIVISIBILITY_TOL)?;
    if !first.holds {
        return Err(PairError::RUndefined { residual: first.residual });
    }
    Ok(fiber_r_expanded(pt, j))
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondDivisibilityEntry {
    pub j: usize,
    pub q_norm: f64,
    pub applicable: bool,
    pub holds: bool,
    /// `‖R_j − L·Q_{j,m+1}‖ / ‖R_j‖`.
    pub residual: f64,
    pub quotient: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondDivisibility {
    pub holds: bool,
    pub entries: Vec<SecondDivisibilityEntry>,
    /// Residual of `R_j = (Σ r_i u_i) α_j Q_{j,m+1}` with one `r` for every applicable `j`.
    pub common_quotient_residual: f64,
    pub common_quotient: Vec<f64>,
    pub common_quotient_holds: bool,
}

fn linear_coefficients(p: &FiberPolynomial) -> Vec<f64> {
    let mut out = vec![0.0; p.nvars()];
    for (e, c) in p.basis().iter().zip(p.coefficients()) {
        out[e.iter().position(|x| *x == 1).expect("linear monomial")] = *c;
    }
    out
}

pub fn second_divisibility(pt: &AdaptedPoint, tol: f64) -> Result<SecondDivisibility, PairError> {
    let n = pt.dim();
    let m = pt.rank();
    if n != m + 1 {
        return Err(PairError::NotCorankOne { corank: n - m });
    }
    let pnorm = fiber_p(pt).norm();
    let cmax = pt.c.max_abs().max(1.0);
    let mut entries = Vec::new();
    let mut stacked: Vec<(FiberPolynomial, FiberPolynomial)> = Vec::new();
    for j in 0..m {
        let q = fiber_q(pt, j, m);
        let r = fiber_r_expanded(pt, j);
        let q_norm = q.norm();
        let applicable = q_norm > 1e-10 * cmax;
        let (holds, residual, quotient) = if applicable {
            let d = r.divide(&q);
            let ok = d.residual <= tol * r.norm() + NOISE_FLOOR * pnorm;
            stacked.push((r.clone(), q.scaled(pt.alpha(j))));
            (ok, d.relative, linear_coefficients(&d.quotient))
        } else {
            (true, 0.0, vec![0.0; n])
        };
        entries.push(SecondDivisibilityEntry {
            j,
            q_norm,
            applicable,
            holds,
            residual,
            quotient,
        });
    }
    let (common_quotient_residual, common_quotient, common_quotient_holds) = common_quotient(&stacked, n, tol, pnorm);
    Ok(SecondDivisibility {
        holds: entries.iter().all(|e| e.holds),
        entries,
        common_quotient_residual,
        common_quotient,
        common_quotient_holds,
    })
}

fn common_quotient(stacked: &[(FiberPolynomial, FiberPolynomial)], n: usize, tol: f64, pnorm: f64) -> (f64, Vec<f64>, bool) {
    if stacked.is_empty() {
        return (0.0, vec![0.0; n], true);
    }
    let rows_per = stacked[0].0.coefficients().len();
    let mut a = DMatrix::zeros(rows_per * stacked.len(), n);
    let mut b = DVector::zeros(rows_per * stacked.len());
    for (s, (r, aq)) in stacked.iter().enumerate() {
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let prod = FiberPolynomial::linear(&e).mul(aq);
            for (row, v) in prod.coefficients().iter().enumerate() {
                a[(s * rows_per + row, i)] = *v;
            }
        }
        for (row, v) in r.coefficients().iter().enumerate() {
            b[s * rows_per + row] = *v;
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let x = svd
        .solve(&b, 1e-12 * smax.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DVector::zeros(n));
    let res = (&a * &x - &b).norm();
    let bn = b.norm();
    let holds = res <= tol * bn + NOISE_FLOOR * pnorm;
    (if bn > 0.0 { res / bn } else { 0.0 }, x.iter().copied().collect(), holds)
}

/// Largest residuals of the relations forced by the first divisibility condition.
#[derive(Debug, Clone, Serialize)]
pub struct RelationsReport {
    /// `X_i(α_j²/α_i²) − 2c_{ji}^j(1 − α_j²/α_i²)`.
    pub cor1: f64,
    /// `X_i(α_j²/α_i)` for `α_i ≠ α_j`.
    pub cor2: f64,
    /// `X_i(α_j/α_k)` for `α_j, α_k ≠ α_i`.
    pub cor3: f64,
    /// `c_{ji}^k (α_i² − α_j²)` for `k > m`.
    pub cor4_coefficients: f64,
    /// Whether `[X_i, X_j] ∉ D ⇒ α_i = α_j` held for every pair.
    pub cor4_implication: bool,
    /// `(α_j²−α_i²)c_{ji}^k + (α_j²−α_k²)c_{jk}^i + (α_i²−α_k²)c_{ik}^j`, pairwise distinct.
    pub cor5: f64,
    /// Corank 1 only: spread of `α_j` over `j` with `[X_j, D] ⊄ D`.
    pub bracket_alpha_spread: Option<f64>,
    /// Corank 1 only: largest `|X_j(α)|` over `j` in the cluster of that common `α`.
    pub acon1: Option<f64>,
}

impl RelationsReport {
    /// Worst residual among the listed relations.
    pub fn max_residual(&self) -> f64 {
        [self.cor1, self.cor2, self.cor3, self.cor4_coefficients, self.cor5]
            .into_iter()
            .chain(self.bracket_alpha_spread)
            .chain(self.acon1)
            .fold(0.0, f64::max)
    }
}

pub fn relations_cor(pt: &AdaptedPoint) -> RelationsReport {
    let n = pt.dim();
    let m = pt.rank();
    let a2 = &pt.alpha2;
    let a = |i: usize| pt.alpha(i);
    let da2 = |k: usize, i: usize| pt.d_alpha2[(k, i)];
    let da = |k: usize, i: usize| da2(k, i) / (2.0 * a(i));
    let mut cor1: f64 = 0.0;
    let mut cor2: f64 = 0.0;
    let mut cor3: f64 = 0.0;
    let mut cor4c: f64 = 0.0;
    let mut cor4i = true;
    let mut cor5: f64 = 0.0;
    let big = 1e-8 * pt.c.max_abs().max(1.0);
    for i in 0..m {
        for j in 0..m {
            let ratio = a2[j] / a2[i];
            let lhs = (da2(i, j) * a2[i] - a2[j] * da2(i, i)) / (a2[i] * a2[i]);
            cor1 = cor1.max((lhs - 2.0 * pt.c.get(j, i, j) * (1.0 - ratio)).abs());
            if !pt.same_cluster(i, j) {
                let d = da2(i, j) / a(i) - a2[j] * da(i, i) / a2[i];
                cor2 = cor2.max(d.abs());
            }
            for k in 0..m {
                if !pt.same_cluster(j, i) && !pt.same_cluster(k, i) {
                    let d = da(i, j) / a(k) - a(j) * da(i, k) / a2[k];
                    cor3 = cor3.max(d.abs());
                }
                if i != j && j != k && i != k {
                    let s = (a2[j] - a2[i]) * pt.c.get(j, i, k)
                        + (a2[j] - a2[k]) * pt.c.get(j, k, i)
                        + (a2[i] - a2[k]) * pt.c.get(i, k, j);
                    cor5 = cor5.max(s.abs());
                }
            }
            for k in m..n {
                let c = pt.c.get(j, i, k);
                cor4c = cor4c.max((c * (a2[i] - a2[j])).abs());
                if c.abs() > big && !pt.same_cluster(i, j) {
                    cor4i = false;
                }
            }
        }
    }
    let (spread, acon1) = if n == m + 1 {
        let set: Vec<usize> = (0..m)
            .filter(|&j| (0..m).any(|i| pt.c.get(j, i, m).abs() > big))
            .collect();
        if set.is_empty() {
            (Some(0.0), Some(0.0))
        } else {
            let (lo, hi) = set
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &j| (lo.min(a(j)), hi.max(a(j))));
            let j0 = set[0];
            let worst = (0..m)
                .filter(|&j| pt.same_cluster(j, j0))
                .map(|j| da(j, j0).abs())
                .fold(0.0, f64::max);
            (Some(hi - lo), Some(worst))
        }
    } else {
        (None, None)
    };
    RelationsReport {
        cor1,
        cor2,
        cor3,
        cor4_coefficients: cor4c,
        cor4_implication: cor4i,
        cor5,
        bracket_alpha_spread: spread,
        acon1,
    }
}
