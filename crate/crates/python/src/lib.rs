//! Python bindings. Build with `--features extension-module` and import as
//! `rf_taxis`.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use rf_taxis::field::{FadingParams, FieldModel as CoreField, PathLossParams};
use rf_taxis::gradest;
use rf_taxis::harness::export::{record_json, summary_json, trajectory_csv};
use rf_taxis::harness::{run_ensemble, run_single, Scenario as CoreScenario};
use rf_taxis::record::RecordDetail;
use rf_taxis::sa::{self, GainSchedule};
use rf_taxis::{Error, Position};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::InvalidParameter { .. }
        | Error::DimensionMismatch { .. }
        | Error::InvalidPosition(_)
        | Error::DistanceTooSmall { .. }
        | Error::ZeroNoise => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn position(coords: Vec<f64>) -> PyResult<Position> {
    Position::new(coords).map_err(to_py)
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Noise-free signal-strength field in dB.
#[pyclass(name = "FieldModel", frozen)]
struct PyFieldModel {
    inner: Arc<CoreField>,
}

#[pymethods]
impl PyFieldModel {
    #[new]
    #[pyo3(signature = (gamma_pl, source, d0_m=1.0, epsilon_floor_m=0.5, fading_amplitude_db=None, fading_wavelength_m=0.125, fading_num_waves=32, fading_seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        gamma_pl: f64,
        source: Vec<f64>,
        d0_m: f64,
        epsilon_floor_m: f64,
        fading_amplitude_db: Option<f64>,
        fading_wavelength_m: f64,
        fading_num_waves: usize,
        fading_seed: u64,
    ) -> PyResult<Self> {
        let params = PathLossParams::new(gamma_pl, d0_m, position(source)?).map_err(to_py)?;
        let mut model = CoreField::new(params)
            .and_then(|m| m.with_epsilon_floor(epsilon_floor_m))
            .map_err(to_py)?;
        if let Some(amplitude_db) = fading_amplitude_db {
            model = model
                .with_fading(FadingParams {
                    wavelength_m: fading_wavelength_m,
                    amplitude_db,
                    num_waves: fading_num_waves,
                    seed: fading_seed,
                })
                .map_err(to_py)?;
        }
        Ok(PyFieldModel { inner: Arc::new(model) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn source(&self) -> Vec<f64> {
        self.inner.source().coords().to_vec()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&position(x)?).map_err(to_py)
    }

    /// Field without fading.
    fn eval_smooth(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval_smooth(&position(x)?).map_err(to_py)
    }

    fn analytic_gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.analytic_gradient(&position(x)?).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let p = self.inner.path_loss();
        format!(
            "FieldModel(gamma_pl={}, source={}, fading={})",
            p.gamma_pl,
            p.source,
            self.inner.fading().is_some()
        )
    }
}

/// A scenario loaded from a TOML config.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    inner: CoreScenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        CoreScenario::from_toml_str(text).map(|inner| PyScenario { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        CoreScenario::load(&path).map(|inner| PyScenario { inner }).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.config.name.clone()
    }

    #[getter]
    fn hash(&self) -> String {
        self.inner.hash.clone()
    }

    #[getter]
    fn optimum(&self) -> Vec<f64> {
        self.inner.optimum.coords().to_vec()
    }

    /// Run `index` as a dict (the full record, probe samples included).
    #[pyo3(signature = (index=0))]
    fn run<'py>(&self, py: Python<'py>, index: u64) -> PyResult<Bound<'py, PyAny>> {
        let r = py
            .detach(|| run_single(&self.inner, index, RecordDetail::Full))
            .map_err(to_py)?;
        json_to_py(py, &record_json(&r))
    }

    /// Run `index` as trajectory CSV text.
    #[pyo3(signature = (index=0))]
    fn trajectory_csv(&self, py: Python<'_>, index: u64) -> PyResult<String> {
        let r = py
            .detach(|| run_single(&self.inner, index, RecordDetail::Trajectory))
            .map_err(to_py)?;
        Ok(trajectory_csv(&r))
    }

    /// Ensemble summary as a dict.
    #[pyo3(signature = (runs, workers=1))]
    fn ensemble<'py>(&self, py: Python<'py>, runs: usize, workers: usize) -> PyResult<Bound<'py, PyAny>> {
        let e = py
            .detach(|| run_ensemble(&self.inner, runs, workers, RecordDetail::Trajectory))
            .map_err(to_py)?;
        json_to_py(py, &summary_json(&e.summary))
    }
}

fn schedule(alpha: f64, gamma_s: f64, a: f64, stability: f64, h0: f64) -> GainSchedule {
    GainSchedule {
        a,
        stability,
        alpha,
        h0_m: h0,
        gamma_s,
    }
}

/// `(a_k, h_k)` of the power-law schedule.
#[pyfunction]
#[pyo3(signature = (k, alpha=1.0, gamma_s=1.0/6.0, a=1.0, A=10.0, h0=1.0))]
#[allow(non_snake_case)]
fn gains(k: usize, alpha: f64, gamma_s: f64, a: f64, A: f64, h0: f64) -> (f64, f64) {
    sa::gains(&schedule(alpha, gamma_s, a, A, h0), k)
}

/// Convergence conditions of the schedule as a dict of booleans plus `beta`.
#[pyfunction]
#[pyo3(signature = (alpha, gamma_s, a=1.0, A=10.0, h0=1.0))]
#[allow(non_snake_case)]
fn check_schedule<'py>(
    py: Python<'py>,
    alpha: f64,
    gamma_s: f64,
    a: f64,
    A: f64,
    h0: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let v = sa::check_schedule(&schedule(alpha, gamma_s, a, A, h0));
    let d = pyo3::types::PyDict::new(py);
    for (key, value) in [
        ("a_positive", v.a_positive),
        ("h_positive", v.h_positive),
        ("a_to_zero", v.a_to_zero),
        ("h_to_zero", v.h_to_zero),
        ("sum_a_diverges", v.sum_a_diverges),
        ("sum_ah_converges", v.sum_ah_converges),
        ("sum_a2_over_h2_converges", v.sum_a2_over_h2_converges),
        ("beta_positive", v.beta_positive),
        ("normality_secondary", v.normality_secondary),
        ("valid", v.valid()),
        ("asymptotically_normal", v.asymptotically_normal()),
    ] {
        d.set_item(key, value)?;
    }
    d.set_item("beta", v.beta)?;
    d.set_item("predicted_rate_exponent", v.predicted_rate_exponent)?;
    Ok(d.into_any())
}

/// Variance of a central-difference component, `sigma^2 / (2 h^2)`.
#[pyfunction]
fn predicted_variance(sigma: f64, h: f64) -> f64 {
    gradest::predicted_variance(sigma, h)
}

/// `(full, small_h, bias_dominated)` SNR of one gradient component.
#[pyfunction]
#[pyo3(signature = (gradient_component, sigma, h, third_derivative_term=0.0))]
fn snr(gradient_component: f64, sigma: f64, h: f64, third_derivative_term: f64) -> PyResult<(f64, f64, bool)> {
    let e = gradest::snr(gradient_component, sigma, h, third_derivative_term).map_err(to_py)?;
    Ok((e.full, e.small_h, e.regime == gradest::SnrRegime::BiasDominated))
}

#[pymodule]
#[pyo3(name = "rf_taxis")]
fn rf_taxis_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFieldModel>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(gains, m)?)?;
    m.add_function(wrap_pyfunction!(check_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_variance, m)?)?;
    m.add_function(wrap_pyfunction!(snr, m)?)?;
    Ok(())
}
