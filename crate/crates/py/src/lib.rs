//! Python bindings: scenes, measurement matrices, simulation, estimation,
//! CRLB and sweeps.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use risdoa::crlb::{crlb_all, fisher_matrix, rad2_to_deg2};
use risdoa::harness::config::{load_scene, EstimatorSettings, ExperimentConfig, Method};
use risdoa::harness::estimate::{estimate_doa, LinkInfo};
use risdoa::harness::sweep::run_sweep;
use risdoa::linalg::{CMat, CVec};
use risdoa::measmat::{interference_gain, optimized_measurement_matrix};
use risdoa::scene::SceneDerived;
use risdoa::sdp::SolverOptions;
use risdoa::signal::{
    random_measurement_matrix, simulate_snapshot, steering_vector, MeasurementMatrix,
};

fn to_py(e: risdoa::Error) -> PyErr {
    match e {
        risdoa::Error::Config(_)
        | risdoa::Error::InvalidScene(_)
        | risdoa::Error::DimensionMismatch(_)
        | risdoa::Error::AngleOutOfRange { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Derived geometry of a scene (angles in degrees on the Python side).
#[pyclass(name = "Scene", frozen)]
#[derive(Clone)]
struct PyScene {
    inner: SceneDerived,
}

#[pymethods]
impl PyScene {
    /// `"table1"` / `"t1"` or a scene TOML path; `m` overrides the element count.
    #[staticmethod]
    #[pyo3(signature = (reference="table1", m=None))]
    fn load(reference: &str, m: Option<usize>) -> PyResult<Self> {
        let mut cfg = load_scene(reference, std::path::Path::new(".")).map_err(to_py)?;
        if let Some(m) = m {
            cfg.num_elements = m;
        }
        Ok(PyScene {
            inner: cfg.derive().map_err(to_py)?,
        })
    }

    fn with_target_angles(&self, thetas_deg: Vec<f64>) -> PyResult<Self> {
        Ok(PyScene {
            inner: self
                .inner
                .with_target_angles_deg(&thetas_deg)
                .map_err(to_py)?,
        })
    }

    #[getter]
    fn theta_tr_deg(&self) -> Vec<f64> {
        self.inner.theta_tr_deg()
    }

    #[getter]
    fn theta_ar_deg(&self) -> f64 {
        self.inner.theta_ar_deg()
    }

    #[getter]
    fn theta_rs_deg(&self) -> f64 {
        self.inner.theta_rs_deg()
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.inner.num_elements
    }

    #[getter]
    fn k_targets(&self) -> usize {
        self.inner.k_targets()
    }
}

/// RIS measurement matrix G (N × M).
#[pyclass(name = "MeasurementMatrix", frozen)]
#[derive(Clone)]
struct PyMatrix {
    inner: MeasurementMatrix,
}

#[pymethods]
impl PyMatrix {
    #[staticmethod]
    fn random(n: usize, m: usize, seed: u64) -> Self {
        PyMatrix {
            inner: random_measurement_matrix(n, m, seed),
        }
    }

    /// Gram design with an interference null toward the AP, then rounding.
    #[staticmethod]
    fn optimized(scene: &PyScene, n: usize, seed: u64) -> PyResult<Self> {
        let (g, _) = optimized_measurement_matrix(&scene.inner, n, seed, &SolverOptions::default())
            .map_err(to_py)?;
        Ok(PyMatrix { inner: g })
    }

    #[staticmethod]
    fn from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(PyValueError::new_err("rows must have equal length"));
        }
        let entries = CMat::from_fn(n, m, |i, j| rows[i][j]);
        Ok(PyMatrix {
            inner: MeasurementMatrix::new(entries, false).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        Ok(PyMatrix {
            inner: MeasurementMatrix::read_csv(path).map_err(to_py)?.0,
        })
    }

    fn write_csv(&self, path: &str, seed: u64) -> PyResult<()> {
        self.inner.write_csv(path, seed).map_err(to_py)
    }

    fn rows(&self) -> Vec<Vec<Complex64>> {
        self.inner
            .entries
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.n_meas(), self.inner.m_elements())
    }

    /// `10 log10 ‖G a(θ_AR)‖²` for the scene's AP direction.
    fn interference_gain_db(&self, scene: &PyScene) -> PyResult<f64> {
        let s = &scene.inner;
        let a = steering_vector(
            s.theta_ar_deg(),
            s.theta_rs_deg(),
            s.num_elements,
            s.spacing_over_lambda,
        )
        .map_err(to_py)?;
        Ok(10.0
            * interference_gain(&self.inner, &a.entries)
                .map_err(to_py)?
                .log10())
    }
}

/// Simulates one snapshot. Returns `(r, theta_deg, sigma_w)`.
#[pyfunction]
#[pyo3(signature = (g, scene, snr_db, seed, interference=true))]
fn simulate(
    g: &PyMatrix,
    scene: &PyScene,
    snr_db: f64,
    seed: u64,
    interference: bool,
) -> PyResult<(Vec<Complex64>, Vec<f64>, f64)> {
    let snap =
        simulate_snapshot(&g.inner, &scene.inner, snr_db, seed, interference).map_err(to_py)?;
    let truth = snap.truth.expect("simulated snapshots carry their truth");
    Ok((
        snap.r.iter().copied().collect(),
        truth.theta_tr_deg,
        truth.sigma_w,
    ))
}

fn run_estimator(
    method: &str,
    r: Vec<Complex64>,
    g: &PyMatrix,
    scene: &PyScene,
    sigma: Option<f64>,
    rho: Option<f64>,
    k: Option<usize>,
) -> PyResult<risdoa::harness::estimate::DoaEstimate> {
    let method = Method::parse(method).map_err(to_py)?;
    let s = &scene.inner;
    let info = LinkInfo {
        g: &g.inner,
        theta_rs_deg: s.theta_rs_deg(),
        theta_ar_deg: s.theta_ar_deg(),
        spacing_over_lambda: s.spacing_over_lambda,
        k_targets: k.unwrap_or(s.k_targets()),
        sigma_w: sigma,
    };
    let mut settings = EstimatorSettings::default();
    settings.anm.rho_override = rho;
    settings.l1.rho_override = rho;
    let r = CVec::from_vec(r);
    estimate_doa(method, &r, &info, &settings).map_err(to_py)
}

/// DOA estimates (degrees, ascending) from one snapshot.
#[pyfunction]
#[pyo3(signature = (method, r, g, scene, sigma=None, rho=None, k=None))]
fn estimate(
    method: &str,
    r: Vec<Complex64>,
    g: &PyMatrix,
    scene: &PyScene,
    sigma: Option<f64>,
    rho: Option<f64>,
    k: Option<usize>,
) -> PyResult<Vec<f64>> {
    Ok(run_estimator(method, r, g, scene, sigma, rho, k)?.angles_deg)
}

/// The estimator's spatial spectrum as `(theta_deg, values)`.
#[pyfunction]
#[pyo3(signature = (method, r, g, scene, sigma=None, rho=None, k=None))]
fn spectrum(
    method: &str,
    r: Vec<Complex64>,
    g: &PyMatrix,
    scene: &PyScene,
    sigma: Option<f64>,
    rho: Option<f64>,
    k: Option<usize>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let est = run_estimator(method, r, g, scene, sigma, rho, k)?;
    let sp = est
        .spectrum
        .ok_or_else(|| PyRuntimeError::new_err("estimator produced no spectrum"))?;
    Ok((sp.thetas, sp.values))
}

/// Per-target √CRLB in degrees for gains `z`, direct-path coefficient `q` and noise `sigma`.
#[pyfunction]
fn crlb_deg(
    g: &PyMatrix,
    scene: &PyScene,
    z: Vec<Complex64>,
    q: Complex64,
    sigma: f64,
) -> PyResult<Vec<f64>> {
    let fim = fisher_matrix(&g.inner, &scene.inner, &CVec::from_vec(z), q, sigma).map_err(to_py)?;
    Ok(crlb_all(&fim)
        .map_err(to_py)?
        .into_iter()
        .map(|v| rad2_to_deg2(v).sqrt())
        .collect())
}

/// Runs a sweep config and returns its rows as dicts (no files written).
#[pyfunction]
#[pyo3(signature = (config_path, trials=None))]
fn sweep<'py>(
    py: Python<'py>,
    config_path: &str,
    trials: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = ExperimentConfig::load(config_path).map_err(to_py)?;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    let table = py.detach(|| run_sweep(&cfg)).map_err(to_py)?;
    table
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item(table.variable.name(), r.value)?;
            d.set_item("method", r.method.name())?;
            d.set_item("rmse_deg", r.rmse_deg)?;
            d.set_item("scored", r.scored)?;
            d.set_item("failures", r.failures)?;
            d.set_item("crlb_deg", r.crlb_deg)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn risdoa_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_class::<PyMatrix>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(crlb_deg, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
