//! Python bindings: parameters, single-point runs, sweeps, boundaries and fits.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use spingas::critfit::{self, FitForm, FitSpec, Weights};
use spingas::dynamics::{self, Model, Point, ProjectionMode, ScanAxis, SteadyOptions};
use spingas::error::Error;
use spingas::sweep::{self, ConditionsMap, SweepGrid};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Config { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn projection(name: &str) -> PyResult<ProjectionMode> {
    match name {
        "hyperfine+zeeman" | "hyperfine-zeeman" => Ok(ProjectionMode::HyperfineZeeman),
        "hyperfine-only" | "hyperfine" => Ok(ProjectionMode::HyperfineOnly),
        _ => Err(PyValueError::new_err(format!("unknown projection '{name}'"))),
    }
}

fn form(name: &str) -> PyResult<FitForm> {
    match name {
        "beta" => Ok(FitForm::Beta),
        "gamma" => Ok(FitForm::Gamma),
        "znu" => Ok(FitForm::Znu),
        "delta" => Ok(FitForm::Delta),
        _ => Err(PyValueError::new_err(format!("unknown fit form '{name}'"))),
    }
}

fn options(t_max: Option<f64>) -> SteadyOptions {
    let mut o = SteadyOptions::default();
    if let Some(t) = t_max {
        o.t_max = t;
    }
    o
}

/// Model parameters with rates in units of Γ.
#[pyclass(name = "SimParams", from_py_object)]
#[derive(Clone)]
pub struct PySimParams {
    inner: dynamics::SimParams,
}

#[pymethods]
impl PySimParams {
    #[new]
    #[pyo3(signature = (i_over_gamma, j_over_gamma, h_over_gamma=0.0, seed=1e-4, b_z=1.0, projection="hyperfine+zeeman"))]
    fn new(i_over_gamma: f64, j_over_gamma: f64, h_over_gamma: f64, seed: f64, b_z: f64, projection: &str) -> PyResult<Self> {
        let mut p = dynamics::SimParams::at(i_over_gamma, j_over_gamma).with_seed(seed);
        if h_over_gamma != 0.0 {
            p = p.with_bias(h_over_gamma);
        }
        p.b_z = b_z;
        p.projection = self::projection(projection)?;
        p.validate().map_err(py_err)?;
        Ok(PySimParams { inner: p })
    }

    #[getter]
    fn i_over_gamma(&self) -> f64 {
        self.inner.i_rate / self.inner.gamma
    }

    #[getter]
    fn j_over_gamma(&self) -> f64 {
        self.inner.j_rate / self.inner.gamma
    }

    /// Γ (s⁻¹)
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn seed(&self) -> f64 {
        self.inner.seed
    }

    #[getter]
    fn b_z(&self) -> f64 {
        self.inner.b_z
    }

    #[getter]
    fn projection(&self) -> &'static str {
        dynamics::steady::projection_label(self.inner.projection)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "SimParams(i_over_gamma={}, j_over_gamma={}, seed={}, projection='{}')",
            self.i_over_gamma(),
            self.j_over_gamma(),
            self.inner.seed,
            self.projection()
        )
    }
}

/// Steady magnetization and response time at one point.
#[pyfunction]
#[pyo3(signature = (params, t_max=None))]
fn simulate<'py>(py: Python<'py>, params: &PySimParams, t_max: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let point = Point::standalone(&params.inner).map_err(py_err)?;
    let (sim, _) = py
        .detach(|| dynamics::simulate(&point, &options(t_max), 0.0))
        .map_err(py_err)?;
    to_py(py, &sim)
}

/// M(t) samples `(times_s, magnetization)` of a run from the seeded state.
#[pyfunction]
#[pyo3(signature = (params, t_max=None))]
fn trajectory(py: Python<'_>, params: &PySimParams, t_max: Option<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let point = Point::standalone(&params.inner).map_err(py_err)?;
    let (_, ss) = py
        .detach(|| dynamics::simulate(&point, &options(t_max), 0.0))
        .map_err(py_err)?;
    Ok((ss.trajectory.times, ss.trajectory.magnetization))
}

/// Rows `(|m_F|, up, down, up_exact, down_exact)` of the pump's transition table.
#[pyfunction]
fn table2() -> PyResult<Vec<(u32, f64, f64, String, String)>> {
    let p = dynamics::SimParams::default();
    let rows = spingas::optics::transition_probability_table(&p.atom, &p.pump).map_err(py_err)?;
    Ok(rows
        .iter()
        .map(|r| (r.abs_m, r.up, r.down, r.up_exact.to_string(), r.down_exact.to_string()))
        .collect())
}

/// Boundary value (units of Γ) of the varied rate, or None if order never sets in.
#[pyfunction]
#[pyo3(signature = (axis, fixed, lo=0.3, hi=20.0, scan=60))]
fn critical_point(py: Python<'_>, axis: &str, fixed: f64, lo: f64, hi: f64, scan: usize) -> PyResult<Option<f64>> {
    let axis = match axis {
        "pump" | "i" => ScanAxis::Pump,
        "exchange" | "j" => ScanAxis::Exchange,
        _ => return Err(PyValueError::new_err(format!("unknown axis '{axis}'"))),
    };
    let p = dynamics::SimParams::default();
    py.detach(|| {
        let model = Model::new(&p)?;
        dynamics::critical_point(&model, &p, axis, fixed, lo, hi, scan)
    })
    .map_err(py_err)
}

/// χ·Γ at `params` from a central difference with bias step `dh_over_gamma`.
#[pyfunction]
#[pyo3(signature = (params, dh_over_gamma=1e-5))]
fn susceptibility<'py>(py: Python<'py>, params: &PySimParams, dh_over_gamma: f64) -> PyResult<Bound<'py, PyAny>> {
    let p = params.inner;
    let s = py
        .detach(|| critfit::susceptibility(&p, dh_over_gamma * p.gamma, &SteadyOptions::default()))
        .map_err(py_err)?;
    to_py(py, &s)
}

/// Sweep over J/Γ (x) and I/Γ (y); returns the full result as a dict.
#[pyfunction]
#[pyo3(signature = (j_over_gamma, i_over_gamma, template=None, workers=1, t_max=None))]
fn sweep_rates<'py>(
    py: Python<'py>,
    j_over_gamma: Vec<f64>,
    i_over_gamma: Vec<f64>,
    template: Option<PySimParams>,
    workers: usize,
    t_max: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let grid = SweepGrid::rates(j_over_gamma, i_over_gamma);
    let p = template.map_or_else(dynamics::SimParams::default, |t| t.inner);
    let r = py
        .detach(|| sweep::run_sweep(&grid, &p, &options(t_max), workers))
        .map_err(py_err)?;
    to_py(py, &r)
}

/// Sweep over density (cm⁻³, x) and pump power (mW, y) through the default conditions map.
#[pyfunction]
#[pyo3(signature = (densities, powers, template=None, workers=1, t_max=None))]
fn sweep_conditions<'py>(
    py: Python<'py>,
    densities: Vec<f64>,
    powers: Vec<f64>,
    template: Option<PySimParams>,
    workers: usize,
    t_max: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let grid = SweepGrid::conditions(densities, powers, ConditionsMap::default());
    let p = template.map_or_else(dynamics::SimParams::default, |t| t.inner);
    let r = py
        .detach(|| sweep::run_sweep(&grid, &p, &options(t_max), workers))
        .map_err(py_err)?;
    to_py(py, &r)
}

/// `(J/Γ, I/Γ)` for density `n` (cm⁻³) and power `phi` (mW).
#[pyfunction]
fn map_conditions(n: f64, phi: f64) -> PyResult<(f64, f64)> {
    let gamma = dynamics::SimParams::default().gamma;
    let (j, i) = sweep::map_conditions(n, phi, &ConditionsMap::default()).map_err(py_err)?;
    Ok((j / gamma, i / gamma))
}

/// Power-law fit; `weights` is "uniform" or "inverse-cube".
#[pyfunction]
#[pyo3(signature = (form, x, y, weights=None, exclusion=None))]
fn fit<'py>(
    py: Python<'py>,
    form: &str,
    x: Vec<f64>,
    y: Vec<f64>,
    weights: Option<&str>,
    exclusion: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut spec = FitSpec::for_form(self::form(form)?);
    if let Some(w) = weights {
        spec.weights = match w {
            "uniform" => Weights::Uniform,
            "inverse-cube" | "x^-3" => Weights::InverseCube,
            _ => return Err(PyValueError::new_err(format!("unknown weights '{w}'"))),
        };
    }
    if let Some(k) = exclusion {
        spec.exclusion = k;
    }
    let r = critfit::three_step_fit(&x, &y, &spec).map_err(py_err)?;
    to_py(py, &r)
}

/// Randomized invariant suite; returns the report with a `passed` flag.
#[pyfunction]
#[pyo3(signature = (sets=10, steps=50, rng_seed=20211010))]
fn selftest<'py>(py: Python<'py>, sets: usize, steps: usize, rng_seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let opts = spingas::selftest::SuiteOptions { sets, steps, rng_seed };
    let r = py.detach(|| spingas::selftest::run_suite(&opts)).map_err(py_err)?;
    let out = to_py(py, &r)?;
    out.set_item("passed", r.passed())?;
    Ok(out)
}

#[pymodule]
fn pyspingas(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", spingas::VERSION)?;
    m.add_class::<PySimParams>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(table2, m)?)?;
    m.add_function(wrap_pyfunction!(critical_point, m)?)?;
    m.add_function(wrap_pyfunction!(susceptibility, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_rates, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_conditions, m)?)?;
    m.add_function(wrap_pyfunction!(map_conditions, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
