//! Python bindings: `Model`, `VerifyReport` and the module-level `generate`.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use geoequiv::constructors::{self, ConstructError};
use geoequiv::geometry::{GeometryModel, Metric, ModelError};
use geoequiv::hamiltonian::{self, CovectorPoint, HamiltonianError, IntegratorConfig};
use geoequiv::pair::{self, PairError};
use geoequiv::verifier::{self, EquivalenceReport, VerifyConfig, VerifyError};

fn model_err(e: ModelError) -> PyErr {
    match e {
        ModelError::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn pair_err(e: PairError) -> PyErr {
    match e {
        PairError::Model(m) => model_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn ham_err(e: HamiltonianError) -> PyErr {
    match e {
        HamiltonianError::Model(m) => model_err(m),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn verify_err(e: VerifyError) -> PyErr {
    match e {
        VerifyError::Pair(p) => pair_err(p),
        VerifyError::Hamiltonian(h) => ham_err(h),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn construct_err(e: ConstructError) -> PyErr {
    match e {
        ConstructError::Model(m) => model_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn metric(tag: u8) -> PyResult<Metric> {
    Metric::from_tag(tag).ok_or_else(|| PyValueError::new_err(format!("metric must be 1 or 2, got {tag}")))
}

/// A pair of sub-Riemannian metrics on a distribution, as loaded from a manifest.
#[pyclass(frozen, module = "pygeoequiv")]
pub struct Model {
    inner: GeometryModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        GeometryModel::from_json_str(text).map(|inner| Model { inner }).map_err(model_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        GeometryModel::load(path).map(|inner| Model { inner }).map_err(model_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(model_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn coords(&self) -> Vec<String> {
        self.inner.coords().to_vec()
    }

    /// `G2` replaced by `G1` and vice versa.
    fn swapped(&self) -> Model {
        Model {
            inner: self.inner.swapped(),
        }
    }

    /// Eigenvalues `α_i²` of the transition operator at `q`, ascending.
    fn eigenvalues(&self, q: Vec<f64>) -> PyResult<Vec<f64>> {
        pair::transition_operator(&self.inner, &q)
            .map(|s| s.eigenvalues)
            .map_err(pair_err)
    }

    /// `(holds, relative residual)` of the first divisibility condition at `q`.
    #[pyo3(signature = (q, tol = pair::DIVISIBILITY_TOL))]
    fn first_divisibility(&self, q: Vec<f64>, tol: f64) -> PyResult<(bool, f64)> {
        let pt = pair::AdaptedFrame::new(&self.inner, &q)
            .and_then(|f| f.at(&q))
            .map_err(pair_err)?;
        let fd = pair::first_divisibility(&self.inner, &pt, tol).map_err(pair_err)?;
        Ok((fd.holds, fd.residual))
    }

    #[pyo3(signature = (q, radius = 0.05))]
    fn is_regular(&self, q: Vec<f64>, radius: f64) -> PyResult<bool> {
        pair::regularity_probe(&self.inner, &q, radius)
            .map(|r| r.regular)
            .map_err(pair_err)
    }

    fn hamiltonian(&self, q: Vec<f64>, p: Vec<f64>, metric: u8) -> PyResult<f64> {
        hamiltonian::hamiltonian(&self.inner, self::metric(metric)?, &CovectorPoint::new(q, p)).map_err(ham_err)
    }

    /// Samples `(t, q, p)` of the normal extremal through `(q, p)`.
    #[pyo3(signature = (q, p, t, metric = 1, tol = 1e-10, max_step = 1e-2))]
    #[allow(clippy::type_complexity)]
    fn geodesic(
        &self,
        py: Python<'_>,
        q: Vec<f64>,
        p: Vec<f64>,
        t: f64,
        metric: u8,
        tol: f64,
        max_step: f64,
    ) -> PyResult<Vec<(f64, Vec<f64>, Vec<f64>)>> {
        let metric = self::metric(metric)?;
        let cfg = IntegratorConfig {
            tol,
            max_step,
            ..Default::default()
        };
        let traj = py
            .detach(|| hamiltonian::integrate(&self.inner, metric, &CovectorPoint::new(q, p), t, &cfg))
            .map_err(ham_err)?;
        Ok(traj
            .times
            .iter()
            .zip(traj.samples)
            .map(|(t, s)| (*t, s.q, s.p))
            .collect())
    }

    #[pyo3(signature = (samples = 50, seed = 0, t = 0.3, tol = 1e-6, integrator_tol = 1e-10, abnormal_cone = 0.1))]
    fn verify(
        &self,
        py: Python<'_>,
        samples: usize,
        seed: u64,
        t: f64,
        tol: f64,
        integrator_tol: f64,
        abnormal_cone: f64,
    ) -> PyResult<VerifyReport> {
        let cfg = VerifyConfig {
            samples,
            seed,
            t,
            tol_curve: tol,
            integrator: IntegratorConfig::with_tol(integrator_tol),
            abnormal_cone,
        };
        py.detach(|| verifier::verify_equivalence(&self.inner, &cfg))
            .map(|inner| VerifyReport { inner })
            .map_err(verify_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(dim={}, rank={}, coords={:?})",
            self.inner.dim(),
            self.inner.rank(),
            self.inner.coords()
        )
    }
}

/// Outcome of a sampled equivalence check.
#[pyclass(frozen, module = "pygeoequiv")]
pub struct VerifyReport {
    inner: EquivalenceReport,
}

#[pymethods]
impl VerifyReport {
    /// `"pass"`, `"fail"` or `"inconclusive"`.
    #[getter]
    fn verdict(&self) -> String {
        serde_json::to_value(self.inner.verdict)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default()
    }

    #[getter]
    fn exit_code(&self) -> i32 {
        self.inner.verdict.exit_code()
    }

    #[getter]
    fn accepted(&self) -> usize {
        self.inner.accepted
    }

    #[getter]
    fn max_deviation(&self) -> f64 {
        self.inner.max_deviation
    }

    #[getter]
    fn max_energy_drift(&self) -> f64 {
        self.inner.max_energy_drift
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("report serialises")
    }

    fn __repr__(&self) -> String {
        format!(
            "VerifyReport(verdict={:?}, accepted={}/{}, max_deviation={:.3e})",
            self.verdict(),
            self.inner.accepted,
            self.inner.config.samples,
            self.inner.max_deviation
        )
    }
}

/// Builds a pair from one of the constructors; `params` is a JSON object string.
#[pyfunction]
#[pyo3(signature = (kind, params = None))]
fn generate(kind: &str, params: Option<&str>) -> PyResult<Model> {
    let value: serde_json::Value = match params {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("params: {e}")))?,
        None => serde_json::Value::Object(Default::default()),
    };
    constructors::generate(kind, &value)
        .map(|inner| Model { inner })
        .map_err(construct_err)
}

#[pymodule]
pub fn pygeoequiv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<VerifyReport>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add("GENERATORS", constructors::GENERATORS.to_vec())?;
    Ok(())
}
