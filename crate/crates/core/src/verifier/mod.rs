//! Numerical certification of geodesic equivalence.
//!
//! For sampled `λ0 ∈ H1` the G1-extremal through `λ0` and the G2-extremal through its
//! orbital image are integrated, and the second curve is compared with the first as an
//! unparametrised curve.

mod curve;
mod orbital;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{classify_distribution, AbnormalField, DistributionKind, GeometryModel, Metric, ModelError};
use crate::hamiltonian::{integrate, integrate_augmented, velocity, CovectorPoint, HamiltonianError, IntegratorConfig, Trajectory};
use crate::pair::{p_intrinsic, AdaptedFrame, PairError};

pub use curve::{chord_deviation, HermiteCurve};
pub use orbital::{check_orbital_identities, orbital_map, OrbitalIdentities, OrbitalImage, LEVEL_TOL};

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Pair(#[from] PairError),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error("covector is not on the level h1 = 1/2 (h1 = {h})")]
    NotOnLevel { h: f64 },
    #[error("orbital map is singular here (alpha_j Q_j,m+1 = {denominator:.3e})")]
    Singular { denominator: f64 },
    #[error("orbital map is only available for corank 0 or 1, found corank {corank}")]
    Unsupported { corank: usize },
    #[error("flow left the domain")]
    Clipped,
    #[error("{0}")]
    Argument(String),
}

impl From<ModelError> for VerifyError {
    fn from(e: ModelError) -> Self {
        VerifyError::Pair(PairError::Model(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub samples: usize,
    pub seed: u64,
    /// G1 parameter time of each extremal.
    pub t: f64,
    pub tol_curve: f64,
    pub integrator: IntegratorConfig,
    /// Half-angle in radians of the excluded cone around the abnormal direction; only
    /// used on quasi-contact distributions.
    pub abnormal_cone: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: 50,
            seed: 0,
            t: 0.3,
            tol_curve: 1e-6,
            integrator: IntegratorConfig::default(),
            abnormal_cone: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 2,
            Verdict::Inconclusive => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleStatus {
    Accepted,
    Clipped,
    Rejected,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleRecord {
    pub index: usize,
    pub status: SampleStatus,
    pub q0: Vec<f64>,
    /// Adapted quasi-impulses of `λ0`.
    pub u0: Vec<f64>,
    pub p0: Vec<f64>,
    pub p0_image: Vec<f64>,
    pub a0: f64,
    /// G1- and G2-arclength of the two curves.
    pub length1: f64,
    pub length2: f64,
    pub deviation: Option<f64>,
    /// `|h2(Φ(λ0)) − ½|`.
    pub level_error: f64,
    pub energy_drift: f64,
    /// Redraws caused by the abnormal cone.
    pub redraws: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl SampleRecord {
    fn empty(index: usize) -> Self {
        SampleRecord {
            index,
            status: SampleStatus::Error,
            q0: Vec::new(),
            u0: Vec::new(),
            p0: Vec::new(),
            p0_image: Vec::new(),
            a0: 0.0,
            length1: 0.0,
            length2: 0.0,
            deviation: None,
            level_error: 0.0,
            energy_drift: 0.0,
            redraws: 0,
            message: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub config: VerifyConfig,
    pub distribution: String,
    pub accepted: usize,
    pub clipped: usize,
    pub rejected: usize,
    pub errors: usize,
    pub max_deviation: f64,
    pub median_deviation: f64,
    pub max_energy_drift: f64,
    pub max_level_error: f64,
    pub verdict: Verdict,
    pub samples: Vec<SampleRecord>,
}

const MAX_REDRAWS: usize = 100;

fn kind_name(k: DistributionKind) -> &'static str {
    match k {
        DistributionKind::Full => "full",
        DistributionKind::Contact => "contact",
        DistributionKind::QuasiContact => "quasi-contact",
        DistributionKind::Other => "other",
    }
}

/// Angle between the D-part of `u` and the abnormal line, measured in the adapted frame.
fn abnormal_angle(
    model: &GeometryModel,
    field: &AbnormalField,
    frame_e: &nalgebra::DMatrix<f64>,
    q: &[f64],
    u: &[f64],
) -> Result<f64, ModelError> {
    let k = field.coefficients_at(q)?;
    let g1 = model.gram_matrix(Metric::First, q)?;
    // coefficients on the G1-orthonormal adapted fields
    let c = frame_e.transpose() * &g1 * k;
    let m = model.rank();
    let ud = nalgebra::DVector::from_column_slice(&u[..m]);
    let cos = (c.dot(&ud) / (c.norm() * ud.norm())).abs().min(1.0);
    Ok(cos.acos())
}

fn run_sample(
    model: &GeometryModel,
    cfg: &VerifyConfig,
    abnormal: Option<&AbnormalField>,
    index: usize,
) -> SampleRecord {
    let mut rec = SampleRecord::empty(index);
    match sample_inner(model, cfg, abnormal, index, &mut rec) {
        Ok(()) => {}
        Err(VerifyError::Clipped) => rec.status = SampleStatus::Clipped,
        Err(e @ (VerifyError::Singular { .. } | VerifyError::NotOnLevel { .. })) => {
            rec.status = SampleStatus::Rejected;
            rec.message = Some(e.to_string());
        }
        Err(e) => {
            rec.status = SampleStatus::Error;
            rec.message = Some(e.to_string());
        }
    }
    rec
}

fn sample_inner(
    model: &GeometryModel,
    cfg: &VerifyConfig,
    abnormal: Option<&AbnormalField>,
    index: usize,
    rec: &mut SampleRecord,
) -> Result<(), VerifyError> {
    let (n, m) = (model.dim(), model.rank());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let q0 = model
        .domain()
        .sample_inner(&mut rng)
        .ok_or_else(|| VerifyError::Argument("could not sample the domain".into()))?;
    rec.q0 = q0.clone();
    let frame = AdaptedFrame::new(model, &q0)?;
    let pt = frame.at(&q0)?;
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut u: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = u[..m].iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut u[..m] {
            *x /= norm;
        }
        u
    };
    let mut u = draw(&mut rng);
    if let Some(field) = abnormal {
        while abnormal_angle(model, field, &pt.e, &q0, &u)? < cfg.abnormal_cone {
            rec.redraws += 1;
            if rec.redraws > MAX_REDRAWS {
                return Err(VerifyError::Argument("no direction outside the abnormal cone".into()));
            }
            u = draw(&mut rng);
        }
    }
    rec.u0 = u.clone();
    let lambda0 = CovectorPoint::new(q0.clone(), pt.covector(&u)?);
    rec.p0 = lambda0.p.clone();
    let img = orbital::orbital_map_at(&frame, &pt, &lambda0)?;
    rec.a0 = img.a;
    rec.p0_image = img.p_image.clone();
    rec.level_error = (img.h2 - 0.5).abs();

    let a = |q: &[f64], p: &[f64]| p_intrinsic(model, q, p).map(f64::sqrt);
    let (gamma1, acc) = integrate_augmented(model, Metric::First, &lambda0, cfg.t, &cfg.integrator, Some(a))?;
    if gamma1.clipped {
        return Err(VerifyError::Clipped);
    }
    let t2 = *acc.last().expect("trajectory has a first sample");
    let gamma2 = integrate(model, Metric::Second, &img.image(), t2, &cfg.integrator)?;
    if gamma2.clipped {
        return Err(VerifyError::Clipped);
    }
    rec.length1 = gamma1.final_time();
    rec.length2 = gamma2.final_time();
    rec.energy_drift = gamma1.energy_drift().max(gamma2.energy_drift());
    rec.deviation = Some(curve_deviation(model, &gamma1, &gamma2)?);
    rec.status = SampleStatus::Accepted;
    Ok(())
}

/// Largest chart distance from the samples of `other` to the Hermite interpolant of
/// `reference`.
pub fn curve_deviation(model: &GeometryModel, reference: &Trajectory, other: &Trajectory) -> Result<f64, VerifyError> {
    let velocities = reference
        .samples
        .iter()
        .map(|l| velocity(model, reference.metric, l))
        .collect::<Result<Vec<_>, _>>()?;
    let curve = HermiteCurve::new(
        reference.times.clone(),
        reference.samples.iter().map(|l| l.q.clone()).collect(),
        velocities,
    );
    Ok(other.positions().map(|x| curve.distance(x)).fold(0.0, f64::max))
}

/// Samples `H1`, maps each covector through the orbital map and compares the two
/// projected extremals. Deterministic for a given seed.
pub fn verify_equivalence(model: &GeometryModel, cfg: &VerifyConfig) -> Result<EquivalenceReport, VerifyError> {
    if cfg.samples == 0 || !(cfg.t > 0.0) || !(cfg.tol_curve > 0.0) || !(cfg.integrator.tol > 0.0) {
        return Err(VerifyError::Argument(
            "samples, T, the curve tolerance and the integrator tolerance must be positive".into(),
        ));
    }
    if !(cfg.abnormal_cone >= 0.0) {
        return Err(VerifyError::Argument("abnormal cone angle must be non-negative".into()));
    }
    let kind = classify_distribution(model)?;
    let abnormal = match kind.kind {
        DistributionKind::QuasiContact => kind.abnormal.as_ref(),
        _ => None,
    };
    let samples: Vec<SampleRecord> = (0..cfg.samples)
        .into_par_iter()
        .map(|k| run_sample(model, cfg, abnormal, k))
        .collect();
    let count = |s: SampleStatus| samples.iter().filter(|r| r.status == s).count();
    let (accepted, clipped, rejected, errors) = (
        count(SampleStatus::Accepted),
        count(SampleStatus::Clipped),
        count(SampleStatus::Rejected),
        count(SampleStatus::Error),
    );
    let mut devs: Vec<f64> = samples.iter().filter_map(|r| r.deviation).collect();
    devs.sort_by(f64::total_cmp);
    let max_deviation = devs.last().copied().unwrap_or(0.0);
    let median_deviation = if devs.is_empty() {
        0.0
    } else if devs.len() % 2 == 1 {
        devs[devs.len() / 2]
    } else {
        0.5 * (devs[devs.len() / 2 - 1] + devs[devs.len() / 2])
    };
    let accepted_iter = || samples.iter().filter(|r| r.status == SampleStatus::Accepted);
    let max_energy_drift = accepted_iter().map(|r| r.energy_drift).fold(0.0, f64::max);
    let max_level_error = accepted_iter().map(|r| r.level_error).fold(0.0, f64::max);
    let verdict = if max_deviation > cfg.tol_curve {
        Verdict::Fail
    } else if 2 * accepted < cfg.samples {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok(EquivalenceReport {
        config: *cfg,
        distribution: kind_name(kind.kind).into(),
        accepted,
        clipped,
        rejected,
        errors,
        max_deviation,
        median_deviation,
        max_energy_drift,
        max_level_error,
        verdict,
        samples,
    })
}
