use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{eval_at, parse_at, ConstructError};
use crate::expr::ScalarExpr;
use crate::geometry::{lie_bracket, Domain, GeometryModel, Metric, ModelError, VectorField};

/// Quasi-contact pair on the standard chart `(x, y, z, w)` with `ω = dz − x dy`,
/// `D = span(∂x, ∂y + x∂z, ∂w)`, abnormal direction `X = ∂w` and leaves `w = const`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuasiContactSpec {
    /// Contact metric `Ḡ` on the leaf frame `(∂x, ∂y + x∂z)`, in `x, y, z`.
    pub gbar: Vec<Vec<String>>,
    /// `β(t)` with `β(0) = 1`.
    pub beta: String,
    pub c1: f64,
    pub c2: f64,
    /// Box in `(x, y, z, w)`, `[-0.5, 0.5]^4` when absent.
    pub domain: Option<Domain>,
}

impl Default for QuasiContactSpec {
    fn default() -> Self {
        QuasiContactSpec {
            gbar: vec![vec!["1".into(), "0".into()], vec!["0".into(), "1".into()]],
            beta: "exp(t)".into(),
            c1: 1.0,
            c2: 1.0,
            domain: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuasiContactPair {
    pub model: GeometryModel,
    /// `β(w)` in the model coordinates.
    pub beta: ScalarExpr,
    pub c1: f64,
    pub c2: f64,
}

/// Largest residual of each structural condition over a point set.
#[derive(Debug, Clone, Default, Serialize)]
pub struct QuasiContactReport {
    pub points: usize,
    /// The G1- and G2-orthogonal complements of `X` in `D` coincide.
    pub d1_equals_d2: f64,
    /// `D1² = D1 + [D1, D1]` is closed under brackets.
    pub integrability: f64,
    /// `dw` vanishes on `D1²`, so its leaves are the level sets of `w`.
    pub leaf_invariance: f64,
    /// `G1|D1 = β(w) · G1|D1` transported from the leaf `w = 0`.
    pub lg1: f64,
    /// `G2|D1 = C1/(1 + C2β) · G1|D1`.
    pub lg2: f64,
    /// `G1(X, X) = 1` and `G2(X, X) = C1/(1 + C2β)²`.
    pub length2: f64,
    /// `X` spans the kernel of `dω|_D`.
    pub abnormal_alignment: f64,
}

impl QuasiContactReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.d1_equals_d2,
            self.integrability,
            self.leaf_invariance,
            self.lg1,
            self.lg2,
            self.length2,
            self.abnormal_alignment,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

const COORDS: [&str; 4] = ["x", "y", "z", "w"];

fn leaf_frame() -> Vec<VectorField> {
    let c = |s: &str| crate::expr::parse(s, &COORDS).expect("fixed frame");
    let f = |v: [&str; 4]| VectorField::new(v.iter().map(|s| c(s)).collect());
    vec![
        f(["1", "0", "0", "0"]),
        f(["0", "1", "x", "0"]),
        f(["0", "0", "0", "1"]),
        f(["0", "0", "1", "0"]),
    ]
}

pub fn quasi_contact_pair(spec: &QuasiContactSpec) -> Result<QuasiContactPair, ConstructError> {
    let (c1, c2) = (spec.c1, spec.c2);
    if c2 == 0.0 {
        return Err(ConstructError::Hypothesis(
            "C2 = 0 gives a constantly proportional pair".into(),
        ));
    }
    if !(c2 > -1.0) || !(c1 > 0.0) {
        return Err(ConstructError::Hypothesis(format!(
            "need C1 > 0 and C2 > -1, found C1 = {c1}, C2 = {c2}"
        )));
    }
    let beta_t = parse_at(&spec.beta, &["t"], "beta")?;
    let b0 = eval_at(&beta_t, &[0.0], "beta")?;
    if (b0 - 1.0).abs() > 1e-12 {
        return Err(ConstructError::Hypothesis(format!("beta(0) = {b0}, expected 1")));
    }
    let domain = spec.domain.clone().unwrap_or_else(|| Domain::cube(4, 0.5));
    domain.validate(4)?;
    if !(domain.min[3] <= 0.0 && domain.max[3] >= 0.0) {
        return Err(super::params_err("domain", "the w-range must contain the leaf w = 0"));
    }
    for k in 0..=200 {
        let t = domain.min[3] + (domain.max[3] - domain.min[3]) * k as f64 / 200.0;
        let b = eval_at(&beta_t, &[t], "beta")?;
        if !(b > 0.0 && 1.0 + c2 * b > 0.0) {
            return Err(ConstructError::Hypothesis(format!(
                "need beta > 0 and 1 + C2 beta > 0, fails at w = {t} (beta = {b})"
            )));
        }
    }
    if spec.gbar.len() != 2 || spec.gbar.iter().any(|r| r.len() != 2) {
        return Err(super::params_err("gbar", "expected a 2x2 matrix"));
    }
    let mut gbar = Vec::new();
    for (a, row) in spec.gbar.iter().enumerate() {
        let mut r = Vec::new();
        for (b, src) in row.iter().enumerate() {
            r.push(parse_at(src, &COORDS[..3], &format!("gbar[{a}][{b}]"))?);
        }
        gbar.push(r);
    }

    let beta = beta_t.compose(&[ScalarExpr::var(3)]);
    let den = 1.0 + c2 * &beta;
    let f2 = c1 * &beta / &den;
    let zero = ScalarExpr::zero();
    let mut g1 = vec![vec![zero.clone(); 3]; 3];
    let mut g2 = vec![vec![zero; 3]; 3];
    for a in 0..2 {
        for b in 0..2 {
            g1[a][b] = &beta * &gbar[a][b];
            g2[a][b] = &f2 * &gbar[a][b];
        }
    }
    g1[2][2] = ScalarExpr::one();
    g2[2][2] = c1 / den.square();
    let model = GeometryModel::new(
        COORDS.iter().map(|s| s.to_string()).collect(),
        3,
        leaf_frame(),
        g1,
        g2,
        domain,
    )?;
    model.validate()?;
    Ok(QuasiContactPair { model, beta, c1, c2 })
}

pub fn build_quasi_contact(spec: &QuasiContactSpec) -> Result<GeometryModel, ConstructError> {
    Ok(quasi_contact_pair(spec)?.model)
}

fn sin_angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    let c = (a.dot(b) / (na * nb)).clamp(-1.0, 1.0);
    (1.0 - c * c).max(0.0).sqrt()
}

impl QuasiContactPair {
    /// Fields spanning `D1`, the G1-orthogonal complement of `X = Y3` in `D`.
    fn d1_fields(&self) -> [VectorField; 2] {
        let frame = self.model.frame();
        let g = self.model.gram(Metric::First);
        let field = |a: usize| {
            let k = -(&g[a][2] / &g[2][2]);
            let comps = frame[a]
                .components()
                .iter()
                .zip(frame[2].components())
                .map(|(p, x)| p + &k * x)
                .collect();
            VectorField::new(comps)
        };
        [field(0), field(1)]
    }

    /// Evaluates every condition at the given points.
    pub fn conditions(&self, points: &[Vec<f64>]) -> Result<QuasiContactReport, ModelError> {
        let [v1, v2] = self.d1_fields();
        let w = lie_bracket(&v1, &v2);
        let w1 = lie_bracket(&v1, &w);
        let w2 = lie_bracket(&v2, &w);
        let abnormal = crate::geometry::classify_distribution(&self.model)?.abnormal;
        let mut rep = QuasiContactReport {
            points: points.len(),
            ..Default::default()
        };
        let ev = |f: &VectorField, q: &[f64]| f.eval(q).map_err(|e| ModelError::eval(q, e));
        for q in points {
            let g1 = self.model.gram_matrix(Metric::First, q)?;
            let g2 = self.model.gram_matrix(Metric::Second, q)?;
            // normals of D1 and D2 inside D, as covectors on the D-frame
            let n1 = g1.column(2).into_owned();
            let n2 = g2.column(2).into_owned();
            rep.d1_equals_d2 = rep.d1_equals_d2.max(sin_angle(&n1, &n2));

            let (a, b, c) = (ev(&v1, q)?, ev(&v2, q)?, ev(&w, q)?);
            let scale = a.norm() * b.norm() * c.norm();
            for extra in [ev(&w1, q)?, ev(&w2, q)?] {
                let m = DMatrix::from_columns(&[a.clone(), b.clone(), c.clone(), extra.clone()]);
                let res = m.determinant().abs() / (scale * extra.norm().max(1.0));
                rep.integrability = rep.integrability.max(res);
            }
            for f in [&a, &b, &c] {
                rep.leaf_invariance = rep.leaf_invariance.max(f[3].abs() / f.norm());
            }

            let beta = self.beta.eval(q).map_err(|e| ModelError::eval(q, e))?;
            let den = 1.0 + self.c2 * beta;
            let mut q0 = q.clone();
            q0[3] = 0.0;
            let g1_leaf = self.model.gram_matrix(Metric::First, &q0)?;
            let restrict = |g: &DMatrix<f64>, fields: &[DVector<f64>; 2], at: &[f64]| -> Result<DMatrix<f64>, ModelError> {
                let fy = self.model.frame_matrix(at)?;
                let coeffs: Vec<DVector<f64>> = fields
                    .iter()
                    .map(|f| {
                        let sol = fy.clone().lu().solve(f).unwrap_or_else(|| DVector::zeros(4));
                        sol.rows(0, 3).into_owned()
                    })
                    .collect();
                Ok(DMatrix::from_fn(2, 2, |i, j| (coeffs[i].transpose() * g * &coeffs[j])[0]))
            };
            let here = [a.clone(), b.clone()];
            let r1 = restrict(&g1, &here, q)?;
            let r2 = restrict(&g2, &here, q)?;
            let leaf = [ev(&v1, &q0)?, ev(&v2, &q0)?];
            let r1_leaf = restrict(&g1_leaf, &leaf, &q0)?;
            let norm = r1.abs().max().max(1.0);
            rep.lg1 = rep.lg1.max((&r1 - &r1_leaf * beta).abs().max() / norm);
            rep.lg2 = rep.lg2.max((&r2 - &r1 * (self.c1 / den)).abs().max() / norm);

            // X is the G1-normal of D1 by construction of the V_a
            let xn = DVector::from_column_slice(&[0.0, 0.0, 1.0]);
            let len1 = g1[(2, 2)];
            let want = self.c1 / (den * den);
            rep.length2 = rep.length2.max((len1 - 1.0).abs()).max((g2[(2, 2)] - want).abs() / want);

            if let Some(ab) = &abnormal {
                let k = ab.coefficients_at(q)?;
                rep.abnormal_alignment = rep.abnormal_alignment.max(sin_angle(&k, &xn));
            }
        }
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_values_at_w0() {
        let pair = quasi_contact_pair(&QuasiContactSpec::default()).unwrap();
        let q = [0.2, -0.1, 0.3, 0.0];
        let g1 = pair.model.gram_matrix(Metric::First, &q).unwrap();
        let g2 = pair.model.gram_matrix(Metric::Second, &q).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!((g2[(a, b)] - 0.5 * g1[(a, b)]).abs() < 1e-15);
            }
        }
        assert_eq!(g1[(2, 2)], 1.0);
        assert!((g2[(2, 2)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn structural_conditions_hold() {
        let spec = QuasiContactSpec {
            gbar: vec![vec!["1 + x^2/4".into(), "y/10".into()], vec!["y/10".into(), "2 + z/5".into()]],
            ..Default::default()
        };
        let pair = quasi_contact_pair(&spec).unwrap();
        let rep = pair.conditions(&pair.model.domain().probe_points(4)).unwrap();
        assert!(rep.max_residual() < 1e-10, "{rep:?}");
    }

    #[test]
    fn hypotheses_are_enforced() {
        for (c1, c2) in [(1.0, 0.0), (1.0, -1.5), (-1.0, 1.0)] {
            let spec = QuasiContactSpec {
                c1,
                c2,
                ..Default::default()
            };
            assert!(matches!(quasi_contact_pair(&spec), Err(ConstructError::Hypothesis(_))));
        }
        let bad_beta = QuasiContactSpec {
            beta: "2 + t".into(),
            ..Default::default()
        };
        assert!(quasi_contact_pair(&bad_beta).is_err());
        let negative = QuasiContactSpec {
            beta: "1 + 3*t".into(),
            c2: -0.9,
            ..Default::default()
        };
        assert!(quasi_contact_pair(&negative).is_err());
    }
}
