//! Normal extremals in canonical cotangent coordinates.
//!
//! For a frame matrix `F` and a Gram matrix `G` on its D-part `Y_D`,
//! `h(q, p) = ½ p_Dᵀ G⁻¹ p_D` with `p_D = Y_Dᵀ p`.

mod ode;
mod trajectory;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{orthonormalize, Frame, GeometryModel, Metric, ModelError};

pub use ode::IntegratorConfig;
pub(crate) use ode::{dopri5, OdeFailure};
pub use trajectory::Trajectory;

#[derive(Debug, thiserror::Error)]
pub enum HamiltonianError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("step size underflow at t = {t}{}", cause.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    StepUnderflow { t: f64, cause: Option<String> },
    #[error("step budget exhausted")]
    TooManySteps,
    #[error("point {q:?} lies outside the model domain")]
    OutsideDomain { q: Vec<f64> },
    #[error("vector is not tangent to D (relative transverse part {residual:.3e})")]
    NotInDistribution { residual: f64 },
    #[error("{0}")]
    Argument(String),
}

/// A covector `λ = (q, p)`, with `p` in the coordinate cobasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovectorPoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl CovectorPoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Self {
        CovectorPoint { q, p }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    fn check(&self, n: usize) -> Result<(), HamiltonianError> {
        if self.q.len() != n || self.p.len() != n {
            return Err(HamiltonianError::Argument(format!(
                "covector has dimensions ({}, {}), model dimension is {n}",
                self.q.len(),
                self.p.len()
            )));
        }
        Ok(())
    }
}

/// `u_i = p(X_i(q))` for every field of `frame`.
pub fn quasi_impulses(frame: &impl Frame, lambda: &CovectorPoint) -> Result<Vec<f64>, ModelError> {
    let f = frame.matrix_at(&lambda.q)?;
    let u = f.transpose() * DVector::from_column_slice(&lambda.p);
    Ok(u.iter().copied().collect())
}

struct Local {
    f: DMatrix<f64>,
    w: DVector<f64>,
    h: f64,
}

fn local(model: &GeometryModel, metric: Metric, q: &[f64], p: &[f64]) -> Result<Local, ModelError> {
    let m = model.rank();
    let f = model.frame_matrix(q)?;
    let pd = f.columns(0, m).transpose() * DVector::from_column_slice(p);
    let chol = model.gram_cholesky(metric, q)?;
    let w = chol.solve(&pd);
    let h = 0.5 * pd.dot(&w);
    Ok(Local { f, w, h })
}

/// `h = ½ ‖p|_D‖²` in the dual norm of the tagged metric.
pub fn hamiltonian(model: &GeometryModel, metric: Metric, lambda: &CovectorPoint) -> Result<f64, HamiltonianError> {
    lambda.check(model.dim())?;
    Ok(local(model, metric, &lambda.q, &lambda.p)?.h)
}

/// `½ Σ u_i²` over an orthonormalised D-frame. Agrees with [`hamiltonian`].
pub fn hamiltonian_orthonormal(
    model: &GeometryModel,
    metric: Metric,
    lambda: &CovectorPoint,
) -> Result<f64, HamiltonianError> {
    lambda.check(model.dim())?;
    let u = quasi_impulses(&orthonormalize(model, metric), lambda)?;
    Ok(0.5 * u[..model.rank()].iter().map(|x| x * x).sum::<f64>())
}

/// Projected velocity `q̇ = ∂h/∂p = Y_D G⁻¹ Y_Dᵀ p`.
pub fn velocity(model: &GeometryModel, metric: Metric, lambda: &CovectorPoint) -> Result<Vec<f64>, HamiltonianError> {
    lambda.check(model.dim())?;
    let l = local(model, metric, &lambda.q, &lambda.p)?;
    let v = l.f.columns(0, model.rank()) * &l.w;
    Ok(v.iter().copied().collect())
}

/// Canonical vector field `(∂h/∂p, −∂h/∂q)` at `λ`.
pub fn hamiltonian_vector_field(
    model: &GeometryModel,
    metric: Metric,
    lambda: &CovectorPoint,
) -> Result<(Vec<f64>, Vec<f64>), HamiltonianError> {
    lambda.check(model.dim())?;
    let n = model.dim();
    let mut y = lambda.q.clone();
    y.extend_from_slice(&lambda.p);
    let mut d = vec![0.0; 2 * n];
    canonical_rhs(model, metric, &y, &mut d)?;
    let dp = d.split_off(n);
    Ok((d, dp))
}

/// Writes `(q̇, ṗ)` for the state `y = (q, p)` into `out`.
pub(crate) fn canonical_rhs(
    model: &GeometryModel,
    metric: Metric,
    y: &[f64],
    out: &mut [f64],
) -> Result<f64, ModelError> {
    let n = model.dim();
    let m = model.rank();
    let (q, p) = y.split_at(n);
    let l = local(model, metric, q, p)?;
    let qdot = l.f.columns(0, m) * &l.w;
    let dframe = model.frame_partials(q)?;
    let dgram = model.gram_partials(metric, q)?;
    let pv = DVector::from_column_slice(p);
    for k in 0..n {
        out[k] = qdot[k];
        let a = (dframe[k].columns(0, m).transpose() * &pv).dot(&l.w);
        let b = (&dgram[k] * &l.w).dot(&l.w);
        out[n + k] = -(a - 0.5 * b);
    }
    Ok(l.h)
}

fn map_failure(e: OdeFailure<ModelError>) -> HamiltonianError {
    match e {
        OdeFailure::Rhs(e) => HamiltonianError::Model(e),
        OdeFailure::Underflow { t, last } => HamiltonianError::StepUnderflow {
            t,
            cause: last.map(|e| e.to_string()),
        },
        OdeFailure::Budget => HamiltonianError::TooManySteps,
    }
}

fn start(model: &GeometryModel, metric: Metric, lambda0: &CovectorPoint) -> Result<f64, HamiltonianError> {
    lambda0.check(model.dim())?;
    if !model.domain().contains(&lambda0.q) {
        return Err(HamiltonianError::OutsideDomain { q: lambda0.q.clone() });
    }
    let h0 = hamiltonian(model, metric, lambda0)?;
    if !(h0 > 0.0) {
        return Err(HamiltonianError::Argument(format!(
            "initial covector has h = {h0:e}; a normal extremal needs h > 0"
        )));
    }
    Ok(h0)
}

/// Integrates the normal extremal through `λ0` over parameter time `t_end` (either sign).
/// Leaving the domain ends the run early with [`Trajectory::clipped`] set.
pub fn integrate(
    model: &GeometryModel,
    metric: Metric,
    lambda0: &CovectorPoint,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, HamiltonianError> {
    integrate_augmented(model, metric, lambda0, t_end, cfg, None::<fn(&[f64], &[f64]) -> Result<f64, ModelError>>)
        .map(|(t, _)| t)
}

/// As [`integrate`], additionally accumulating `∫ g(q, p) dt` alongside the flow. The second
/// component holds the running integral at each sample.
pub fn integrate_augmented<G>(
    model: &GeometryModel,
    metric: Metric,
    lambda0: &CovectorPoint,
    t_end: f64,
    cfg: &IntegratorConfig,
    integrand: Option<G>,
) -> Result<(Trajectory, Vec<f64>), HamiltonianError>
where
    G: Fn(&[f64], &[f64]) -> Result<f64, ModelError>,
{
    if !t_end.is_finite() {
        return Err(HamiltonianError::Argument("integration time must be finite".into()));
    }
    start(model, metric, lambda0)?;
    let n = model.dim();
    let aug = integrand.is_some();
    let mut y0 = lambda0.q.clone();
    y0.extend_from_slice(&lambda0.p);
    if aug {
        y0.push(0.0);
    }
    let domain = model.domain();
    let sol = dopri5(
        |y, d| {
            canonical_rhs(model, metric, &y[..2 * n], &mut d[..2 * n])?;
            if let Some(g) = &integrand {
                d[2 * n] = g(&y[..n], &y[n..2 * n])?;
            }
            Ok(())
        },
        |y| domain.contains(&y[..n]),
        &y0,
        t_end,
        cfg,
    )
    .map_err(map_failure)?;
    let mut samples = Vec::with_capacity(sol.y.len());
    let mut h_values = Vec::with_capacity(sol.y.len());
    let mut acc = Vec::new();
    for y in &sol.y {
        let lam = CovectorPoint::new(y[..n].to_vec(), y[n..2 * n].to_vec());
        h_values.push(hamiltonian(model, metric, &lam)?);
        samples.push(lam);
        if aug {
            acc.push(y[2 * n]);
        }
    }
    Ok((
        Trajectory {
            times: sol.t,
            samples,
            h_values,
            metric,
            clipped: sol.clipped,
        },
        acc,
    ))
}

/// Covector at `q` whose extremal leaves in direction `v ∈ D(q)` with `h = ½`; the
/// quasi-impulses of the transverse frame fields are set to `transverse`.
pub fn initial_covector(
    model: &GeometryModel,
    metric: Metric,
    q: &[f64],
    v: &[f64],
    transverse: &[f64],
) -> Result<CovectorPoint, HamiltonianError> {
    let n = model.dim();
    let m = model.rank();
    if q.len() != n || v.len() != n {
        return Err(HamiltonianError::Argument(format!(
            "point and vector need {n} components, found {} and {}",
            q.len(),
            v.len()
        )));
    }
    if transverse.len() != n - m {
        return Err(HamiltonianError::Argument(format!(
            "expected {} transverse quasi-impulses, found {}",
            n - m,
            transverse.len()
        )));
    }
    let f = model.frame_matrix(q)?;
    let lu = f.clone().lu();
    let c = lu
        .solve(&DVector::from_column_slice(v))
        .ok_or_else(|| ModelError::SingularFrame { q: q.to_vec() })?;
    let cn = c.norm();
    if cn == 0.0 {
        return Err(HamiltonianError::Argument("direction vector is zero".into()));
    }
    let residual = c.rows(m, n - m).norm() / cn;
    if residual > 1e-9 {
        return Err(HamiltonianError::NotInDistribution { residual });
    }
    let g = model.gram_matrix(metric, q)?;
    let cd = c.rows(0, m).into_owned();
    let gc = &g * &cd;
    let norm = cd.dot(&gc).sqrt();
    let mut rhs = DVector::zeros(n);
    rhs.rows_mut(0, m).copy_from(&(gc / norm));
    for (i, t) in transverse.iter().enumerate() {
        rhs[m + i] = *t;
    }
    let p = f
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| ModelError::SingularFrame { q: q.to_vec() })?;
    Ok(CovectorPoint::new(q.to_vec(), p.iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ScalarExpr};
    use crate::geometry::{Domain, VectorField};

    fn euclid() -> GeometryModel {
        let id = vec![vec![ScalarExpr::one(), ScalarExpr::zero()], vec![ScalarExpr::zero(), ScalarExpr::one()]];
        GeometryModel::with_coordinate_frame(vec!["x".into(), "y".into()], id.clone(), id, Domain::cube(2, 5.0)).unwrap()
    }

    fn heisenberg() -> GeometryModel {
        let c = ["x", "y", "z"];
        let f = |s: [&str; 3]| VectorField::new(s.iter().map(|e| parse(e, &c).unwrap()).collect());
        let id = vec![vec![ScalarExpr::one(), ScalarExpr::zero()], vec![ScalarExpr::zero(), ScalarExpr::one()]];
        GeometryModel::new(
            c.iter().map(|s| s.to_string()).collect(),
            2,
            vec![f(["1", "0", "-y/2"]), f(["0", "1", "x/2"]), f(["0", "0", "1"])],
            id.clone(),
            id,
            Domain::cube(3, 3.0),
        )
        .unwrap()
    }

    #[test]
    fn quasi_impulse_values() {
        let m = heisenberg();
        let u = quasi_impulses(&m, &CovectorPoint::new(vec![0.0, 2.0, 0.0], vec![1.0, 0.0, 4.0])).unwrap();
        assert_eq!(u[0], -3.0);
        let u = quasi_impulses(&euclid(), &CovectorPoint::new(vec![0.1, 0.2], vec![3.0, -1.0])).unwrap();
        assert_eq!(u, vec![3.0, -1.0]);
    }

    #[test]
    fn hamiltonian_values() {
        let e = euclid();
        assert_eq!(hamiltonian(&e, Metric::First, &CovectorPoint::new(vec![0.0, 0.0], vec![1.0, 0.0])).unwrap(), 0.5);
        let h = heisenberg();
        assert_eq!(hamiltonian(&h, Metric::First, &CovectorPoint::new(vec![0.0; 3], vec![0.0, 0.0, 1.0])).unwrap(), 0.0);
        let g = vec![
            vec![ScalarExpr::constant(4.0), ScalarExpr::zero()],
            vec![ScalarExpr::zero(), ScalarExpr::one()],
        ];
        let d = GeometryModel::with_coordinate_frame(vec!["x".into(), "y".into()], g.clone(), g, Domain::cube(2, 1.0)).unwrap();
        let lam = CovectorPoint::new(vec![0.0, 0.0], vec![2.0, 0.0]);
        assert!((hamiltonian(&d, Metric::First, &lam).unwrap() - 0.5).abs() < 1e-15);
        assert!((hamiltonian_orthonormal(&d, Metric::First, &lam).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn euclidean_line() {
        let t = integrate(
            &euclid(),
            Metric::First,
            &CovectorPoint::new(vec![0.0, 0.0], vec![1.0, 0.0]),
            1.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        let end = &t.samples.last().unwrap().q;
        assert!((end[0] - 1.0).abs() < 1e-12 && end[1].abs() < 1e-12);
        assert!(!t.clipped);
    }

    #[test]
    fn heisenberg_conservation_and_reversal() {
        let m = heisenberg();
        let cfg = IntegratorConfig::default();
        let l0 = CovectorPoint::new(vec![0.0; 3], vec![1.0, 0.0, 0.5]);
        let t = integrate(&m, Metric::First, &l0, 0.5, &cfg).unwrap();
        let h0 = t.h_values[0];
        assert!(t.h_values.iter().all(|h| (h - h0).abs() < 1e-9));
        let back = integrate(&m, Metric::First, t.samples.last().unwrap(), -0.5, &cfg).unwrap();
        let end = back.samples.last().unwrap();
        for k in 0..3 {
            assert!((end.q[k] - l0.q[k]).abs() < 1e-8);
            assert!((end.p[k] - l0.p[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn initial_covectors() {
        let p = initial_covector(&euclid(), Metric::First, &[0.0, 0.0], &[0.0, 2.0], &[]).unwrap();
        assert_eq!(p.p, vec![0.0, 1.0]);
        assert!(matches!(
            initial_covector(&euclid(), Metric::First, &[0.0, 0.0], &[0.0, 2.0], &[1.0]),
            Err(HamiltonianError::Argument(_))
        ));
        let h = heisenberg();
        for c in [-2.0, 0.0, 3.5] {
            let lam = initial_covector(&h, Metric::First, &[0.0; 3], &[1.0, 0.0, 0.0], &[c]).unwrap();
            assert_eq!(lam.p, vec![1.0, 0.0, c]);
            let v = velocity(&h, Metric::First, &lam).unwrap();
            assert!((v[0] - 1.0).abs() < 1e-15 && v[1].abs() < 1e-15 && v[2].abs() < 1e-15);
        }
        assert!(matches!(
            initial_covector(&h, Metric::First, &[0.0; 3], &[0.0, 0.0, 1.0], &[0.0]),
            Err(HamiltonianError::NotInDistribution { .. })
        ));
    }
}
