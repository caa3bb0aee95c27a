use serde::{Deserialize, Serialize};

use super::{eval_at, parse_at, ConstructError};
use crate::expr::ScalarExpr;
use crate::geometry::{Domain, GeometryModel};

/// Radial samples in `(0, r_max]` used for the one-variable hypothesis checks.
fn radial_samples(r_max: f64) -> Vec<f64> {
    (1..=200).map(|k| r_max * k as f64 / 200.0).collect()
}

fn check_annulus(r_min: f64, r_max: f64) -> Result<(), ConstructError> {
    if !(r_min > 0.0 && r_max > r_min) {
        return Err(super::params_err(
            "r_min",
            format!("need 0 < r_min < r_max, found {r_min}, {r_max}"),
        ));
    }
    Ok(())
}

fn xy() -> (ScalarExpr, ScalarExpr) {
    (ScalarExpr::var(0), ScalarExpr::var(1))
}

fn coords() -> Vec<String> {
    vec!["x".into(), "y".into()]
}

/// Singular point with a collision of eigenvalues, case 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Gendini1Spec {
    /// `U(u)`.
    pub u: String,
    /// `V(v)`.
    pub v: String,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for Gendini1Spec {
    fn default() -> Self {
        Gendini1Spec {
            u: "1 - u".into(),
            v: "1 + v".into(),
            r_min: 0.1,
            r_max: 0.4,
        }
    }
}

/// Case 1 in Cartesian coordinates on an annulus. With `u = r cos²(θ/2)`,
/// `v = r sin²(θ/2)`, `A = U(u) + V(v)` and `S = V(v) − U(u)`:
/// `G1 = (1/U − 1/V)/(4r) (dx² + dy²)` and
/// `G2 = S/(8r) [(A − S cos θ) dx² − 2 S sin θ dx dy + (A + S cos θ) dy²]`.
pub fn build_gendini_case1(spec: &Gendini1Spec) -> Result<GeometryModel, ConstructError> {
    check_annulus(spec.r_min, spec.r_max)?;
    let uf = parse_at(&spec.u, &["u"], "u")?;
    let vf = parse_at(&spec.v, &["v"], "v")?;
    let u0 = eval_at(&uf, &[0.0], "U")?;
    let v0 = eval_at(&vf, &[0.0], "V")?;
    if (u0 - v0).abs() > 1e-12 * u0.abs().max(1.0) {
        return Err(ConstructError::Hypothesis(format!("U(0) = {u0} differs from V(0) = {v0}")));
    }
    let du0 = eval_at(&uf.differentiate(0), &[0.0], "U'")?;
    let dv0 = eval_at(&vf.differentiate(0), &[0.0], "V'")?;
    if (du0 + dv0).abs() > 1e-9 * du0.abs().max(1.0) {
        return Err(ConstructError::Hypothesis(format!("U'(0) = {du0} is not -V'(0) = {}", -dv0)));
    }
    if !(dv0 > 0.0) {
        return Err(ConstructError::Hypothesis(format!("V'(0) = {dv0} is not positive")));
    }
    for s in radial_samples(spec.r_max) {
        let (us, vs) = (eval_at(&uf, &[s], "U")?, eval_at(&vf, &[s], "V")?);
        if !(0.0 < us && us < u0 && v0 < vs) {
            return Err(ConstructError::Hypothesis(format!(
                "0 < U(u) < U(0) < V(v) fails at u = v = {s} (U = {us}, V = {vs})"
            )));
        }
    }

    let (x, y) = xy();
    let r = (x.square() + y.square()).sqrt();
    let uu = uf.compose(&[(&r + &x) / 2.0]);
    let vv = vf.compose(&[(&r - &x) / 2.0]);
    let a = &uu + &vv;
    let s = &vv - &uu;
    let conformal = (uu.recip() - vv.recip()) / (&r * 4.0);
    let k = &s / (&r * 8.0);
    let c = &s * &x / &r;
    let sn = &s * &y / &r;
    let off = -(&k * &sn);
    let zero = ScalarExpr::zero();
    let g1 = vec![vec![conformal.clone(), zero.clone()], vec![zero, conformal]];
    let g2 = vec![vec![&k * (&a - &c), off.clone()], vec![off, &k * (&a + &c)]];
    let model = GeometryModel::with_coordinate_frame(coords(), g1, g2, Domain::annulus(spec.r_min, spec.r_max))?;
    model.validate()?;
    Ok(model)
}

/// Singular point with a collision of eigenvalues, case 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Gendini2Spec {
    /// `R(r)`.
    pub r: String,
    pub a: f64,
    pub c: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for Gendini2Spec {
    fn default() -> Self {
        Gendini2Spec {
            r: "1 + r^2".into(),
            a: 1.0,
            c: 1.0,
            r_min: 0.1,
            r_max: 0.4,
        }
    }
}

/// Case 2 in Cartesian coordinates on an annulus:
/// `G1 = a|1/C − 1/R|/r² (dr² + r²dθ²)` and `G2 = aCR|1/C − 1/R|/r² (R dr² + C r²dθ²)`.
pub fn build_gendini_case2(spec: &Gendini2Spec) -> Result<GeometryModel, ConstructError> {
    check_annulus(spec.r_min, spec.r_max)?;
    if !(spec.a > 0.0 && spec.c > 0.0) {
        return Err(ConstructError::Hypothesis(format!(
            "a and C must be positive, found a = {}, C = {}",
            spec.a, spec.c
        )));
    }
    let rf = parse_at(&spec.r, &["r"], "r")?;
    let c = spec.c;
    let r0 = eval_at(&rf, &[0.0], "R")?;
    if (r0 - c).abs() > 1e-12 * c.max(1.0) {
        return Err(ConstructError::Hypothesis(format!("R(0) = {r0} differs from C = {c}")));
    }
    let d1 = rf.differentiate(0);
    let dr0 = eval_at(&d1, &[0.0], "R'")?;
    if dr0.abs() > 1e-9 {
        return Err(ConstructError::Hypothesis(format!("R'(0) = {dr0} is not zero")));
    }
    let ddr0 = eval_at(&d1.differentiate(0), &[0.0], "R''")?;
    if ddr0.abs() <= 1e-9 {
        return Err(ConstructError::Hypothesis("R''(0) vanishes".into()));
    }
    let mut sign = 0.0;
    for s in radial_samples(spec.r_max) {
        let v = eval_at(&rf, &[s], "R")?;
        let side = if v > c {
            1.0
        } else if v < c {
            -1.0
        } else {
            0.0
        };
        if side == 0.0 || v <= 0.0 || (sign != 0.0 && side != sign) {
            return Err(ConstructError::Hypothesis(format!(
                "R(r) must stay positive and on one side of C for r > 0; R({s}) = {v}"
            )));
        }
        sign = side;
    }

    let (x, y) = xy();
    let r2 = x.square() + y.square();
    let rr = rf.compose(&[r2.sqrt()]);
    // |1/C − 1/R| with the sign found above
    let diff = (1.0 / c - rr.recip()) * sign;
    let conformal = &diff * spec.a / &r2;
    let k = &rr * &diff * (spec.a * c) / &r2;
    let xx = x.square();
    let yy = y.square();
    let g11 = &k * (&rr * &xx + &yy * c) / &r2;
    let g22 = &k * (&rr * &yy + &xx * c) / &r2;
    let g12 = &k * ((&rr - c) * &x * &y) / &r2;
    let zero = ScalarExpr::zero();
    let g1 = vec![vec![conformal.clone(), zero.clone()], vec![zero, conformal]];
    let g2 = vec![vec![g11, g12.clone()], vec![g12, g22]];
    let model = GeometryModel::with_coordinate_frame(coords(), g1, g2, Domain::annulus(spec.r_min, spec.r_max))?;
    model.validate()?;
    Ok(model)
}
