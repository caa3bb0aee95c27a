use serde::Serialize;

use super::VerifyError;
use crate::geometry::Metric;
use crate::hamiltonian::{hamiltonian, integrate, CovectorPoint, IntegratorConfig};
use crate::pair::{fiber_hp_intrinsic, fiber_q, r_direct, AdaptedFrame, AdaptedPoint};

/// Tolerance on `h1(λ) = ½` for points handed to the orbital map.
pub const LEVEL_TOL: f64 = 1e-9;

/// Denominators `|α_j Q_{j,m+1}|` below this (relative to `|u|`) count as singular.
const SINGULAR_TOL: f64 = 1e-8;

/// Image of `λ ∈ H1` under the orbital map, in quasi-impulses of the adapted frame.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitalImage {
    pub q: Vec<f64>,
    /// Quasi-impulses of `λ` in the adapted frame.
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    /// Covector components of `Φ(λ)`.
    pub p_image: Vec<f64>,
    /// `a(λ) = √𝒫(λ)`.
    pub a: f64,
    /// Index `j̄` used for the transverse component, when there is one.
    pub j_bar: Option<usize>,
    /// `h2(Φ(λ))`, which must equal ½.
    pub h2: f64,
}

impl OrbitalImage {
    pub fn image(&self) -> CovectorPoint {
        CovectorPoint::new(self.q.clone(), self.p_image.clone())
    }
}

fn h1_adapted(pt: &AdaptedPoint, u: &[f64]) -> f64 {
    0.5 * u[..pt.rank()].iter().map(|x| x * x).sum::<f64>()
}

/// `Φ(λ)` from the component formulas: `Φ_i = α_i² u_i / a` on `D`, and for corank 1
/// `Φ_{m+1} = R_j̄ / (α_j̄ Q_{j̄,m+1} a)` with `j̄` maximising `|α_j Q_{j,m+1}(λ)|`.
pub fn orbital_map(frame: &AdaptedFrame, lambda: &CovectorPoint) -> Result<OrbitalImage, VerifyError> {
    let pt = frame.at(&lambda.q)?;
    orbital_map_at(frame, &pt, lambda)
}

pub(crate) fn orbital_map_at(
    frame: &AdaptedFrame,
    pt: &AdaptedPoint,
    lambda: &CovectorPoint,
) -> Result<OrbitalImage, VerifyError> {
    let model = frame.model();
    let (n, m) = (model.dim(), model.rank());
    if n > m + 1 {
        return Err(VerifyError::Unsupported { corank: n - m });
    }
    let u = pt.quasi_impulses(&lambda.p);
    let h1 = h1_adapted(pt, &u);
    if (h1 - 0.5).abs() > LEVEL_TOL {
        return Err(VerifyError::NotOnLevel { h: h1 });
    }
    let pval: f64 = (0..m).map(|i| pt.alpha2[i] * u[i] * u[i]).sum();
    let a = pval.sqrt();
    let mut phi: Vec<f64> = (0..m).map(|i| pt.alpha2[i] * u[i] / a).collect();
    let mut j_bar = None;
    if n == m + 1 {
        let (j, qj) = (0..m)
            .map(|j| (j, pt.alpha(j) * fiber_q(pt, j, m).eval(&u)))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .expect("rank is positive");
        let unorm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if qj.abs() <= SINGULAR_TOL * unorm.max(1.0) {
            return Err(VerifyError::Singular { denominator: qj });
        }
        let hp = fiber_hp_intrinsic(model, pt)?;
        phi.push(r_direct(pt, &hp, &u, j) / (qj * a));
        j_bar = Some(j);
    }
    let p_image = pt.covector(&phi)?;
    let image = CovectorPoint::new(lambda.q.clone(), p_image);
    let h2 = hamiltonian(model, Metric::Second, &image)?;
    Ok(OrbitalImage {
        q: lambda.q.clone(),
        u,
        phi,
        p_image: image.p,
        a,
        j_bar,
        h2,
    })
}

/// Residuals of the two identities an orbital map must satisfy at `λ`:
/// `(I)_j = α_j Σ_{k>m} Q_jk Φ_k − R_j/a` for `j ≤ m`, and
/// `(II)_s = h⃗1(Φ_s) − Σ_{k>m} Q_sk Φ_k − (1/a) Σ_{k≤m} Q_sk α_k u_k` for `s > m`.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitalIdentities {
    pub identity_i: Vec<f64>,
    pub identity_ii: Vec<f64>,
}

impl OrbitalIdentities {
    pub fn max_i(&self) -> f64 {
        self.identity_i.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    pub fn max_ii(&self) -> f64 {
        self.identity_ii.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Flow-time step of the central difference for `h⃗1(Φ_s)`.
const FLOW_STEP: f64 = 1e-5;

pub fn check_orbital_identities(frame: &AdaptedFrame, lambda: &CovectorPoint) -> Result<OrbitalIdentities, VerifyError> {
    let model = frame.model();
    let (n, m) = (model.dim(), model.rank());
    let pt = frame.at(&lambda.q)?;
    let img = orbital_map_at(frame, &pt, lambda)?;
    let u = &img.u;
    let hp = fiber_hp_intrinsic(model, &pt)?;
    let identity_i = (0..m)
        .map(|j| {
            let lhs: f64 = (m..n).map(|k| pt.alpha(j) * fiber_q(&pt, j, k).eval(u) * img.phi[k]).sum();
            lhs - r_direct(&pt, &hp, u, j) / img.a
        })
        .collect();
    let mut identity_ii = Vec::new();
    if n > m {
        let cfg = IntegratorConfig {
            tol: 1e-13,
            max_step: FLOW_STEP,
            ..Default::default()
        };
        let shifted = |t: f64| -> Result<OrbitalImage, VerifyError> {
            let traj = integrate(model, Metric::First, lambda, t, &cfg)?;
            if traj.clipped {
                return Err(VerifyError::Clipped);
            }
            orbital_map(frame, traj.last())
        };
        let (fwd, bwd) = (shifted(FLOW_STEP)?, shifted(-FLOW_STEP)?);
        for s in m..n {
            let dphi = (fwd.phi[s] - bwd.phi[s]) / (2.0 * FLOW_STEP);
            let trans: f64 = (m..n).map(|k| fiber_q(&pt, s, k).eval(u) * img.phi[k]).sum();
            let along: f64 = (0..m).map(|k| fiber_q(&pt, s, k).eval(u) * pt.alpha(k) * u[k]).sum();
            identity_ii.push(dphi - trans - along / img.a);
        }
    }
    Ok(OrbitalIdentities {
        identity_i,
        identity_ii,
    })
}
