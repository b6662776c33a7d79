//! Python bindings: states, moment matrices, minors, multicopy observables,
//! circuit readouts and the reproduction jobs.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nonclass_core::circuits::{self, Preset};
use nonclass_core::minors::{self, parse_subset, Verdict, DETECTION_EPSILON};
use nonclass_core::moments::MomentMatrix;
use nonclass_core::multicopy::{build_multicopy, multicopy_expectation};
use nonclass_core::repro::{self, ReproConfig, ReproJob, Target};
use nonclass_core::states::{default_cutoff, StateSpec};
use nonclass_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::ResourceLimit { .. } | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Single-mode state description; built lazily at an automatic cutoff.
#[pyclass(name = "State", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyState {
    spec: StateSpec,
}

#[pymethods]
impl PyState {
    #[staticmethod]
    fn fock(n: usize) -> Self {
        PyState { spec: StateSpec::fock(n) }
    }

    #[staticmethod]
    fn coherent(alpha: Complex64) -> Self {
        PyState { spec: StateSpec::coherent(alpha) }
    }

    #[staticmethod]
    #[pyo3(signature = (r, phi = 0.0))]
    fn squeezed(r: f64, phi: f64) -> Self {
        PyState { spec: StateSpec::squeezed_with_phase(r, phi) }
    }

    #[staticmethod]
    fn cat_even(beta: Complex64) -> Self {
        PyState { spec: StateSpec::cat_even(beta) }
    }

    #[staticmethod]
    fn cat_odd(beta: Complex64) -> Self {
        PyState { spec: StateSpec::cat_odd(beta) }
    }

    #[staticmethod]
    fn thermal(nbar: f64) -> Self {
        PyState { spec: StateSpec::thermal(nbar) }
    }

    #[staticmethod]
    fn squeezed_thermal(nbar: f64, r: f64) -> Self {
        PyState { spec: StateSpec::squeezed_thermal(nbar, r) }
    }

    #[staticmethod]
    fn superposition012(a: f64, b: f64, c: f64) -> Self {
        PyState { spec: StateSpec::superposition012(a, b, c) }
    }

    fn displaced(&self, alpha: Complex64) -> Self {
        PyState { spec: self.spec.clone().displaced(alpha) }
    }

    fn rotated(&self, theta: f64) -> Self {
        PyState { spec: self.spec.clone().rotated(theta) }
    }

    #[pyo3(signature = (tail_tol = 1e-12))]
    fn cutoff(&self, tail_tol: f64) -> PyResult<usize> {
        default_cutoff(&self.spec, tail_tol).map_err(py_err)
    }

    #[pyo3(signature = (tail_tol = 1e-12))]
    fn populations(&self, tail_tol: f64) -> PyResult<Vec<f64>> {
        Ok(repro::prepare(&self.spec, tail_tol).map_err(py_err)?.populations())
    }

    fn label(&self) -> String {
        self.spec.label()
    }

    fn __repr__(&self) -> String {
        format!("State({})", self.spec.label())
    }
}

fn subset_arg(subset: &Bound<'_, PyAny>) -> PyResult<Vec<usize>> {
    if let Ok(s) = subset.extract::<String>() {
        return parse_subset(&s).map_err(py_err);
    }
    let v: Vec<usize> = subset.extract()?;
    minors::normalize_subset(&v).map_err(py_err)
}

/// Moment matrix `D_n` as nested lists of complex numbers.
#[pyfunction]
#[pyo3(signature = (state, n = 6, tail_tol = 1e-12))]
fn moment_matrix(state: &PyState, n: usize, tail_tol: f64) -> PyResult<Vec<Vec<Complex64>>> {
    let rho = repro::prepare(&state.spec, tail_tol).map_err(py_err)?;
    let m = MomentMatrix::build(&rho, n).map_err(py_err)?;
    let e = m.entries();
    Ok((0..n).map(|i| (0..n).map(|j| e[(i, j)]).collect()).collect())
}

/// Numeric principal minor; returns `(value, detected)`.
#[pyfunction]
#[pyo3(signature = (state, subset, tail_tol = 1e-12))]
fn principal_minor(state: &PyState, subset: &Bound<'_, PyAny>, tail_tol: f64) -> PyResult<(f64, bool)> {
    let s = subset_arg(subset)?;
    let rho = repro::prepare(&state.spec, tail_tol).map_err(py_err)?;
    let m = MomentMatrix::build(&rho, 6).map_err(py_err)?;
    let v = minors::minor_value(&m, &s).map_err(py_err)?;
    Ok((v, Verdict::from_value(v, DETECTION_EPSILON).detected()))
}

/// Closed-form minor for the tabulated families.
#[pyfunction]
fn analytic_minor(state: &PyState, subset: &Bound<'_, PyAny>) -> PyResult<f64> {
    if !state.spec.modifiers.is_empty() {
        return Err(PyValueError::new_err("closed forms cover unmodified families only"));
    }
    minors::analytic_minor(&state.spec.family, &subset_arg(subset)?).map_err(py_err)
}

#[pyfunction]
fn gaussian_nonclassical(nbar: f64, r: f64) -> bool {
    minors::gaussian_nonclassical(nbar, r)
}

/// Normally-ordered multicopy observable `B_S`, printed.
#[pyfunction]
fn multicopy_observable(subset: &Bound<'_, PyAny>) -> PyResult<String> {
    Ok(build_multicopy(&subset_arg(subset)?).map_err(py_err)?.polynomial().to_string())
}

/// `⟨⟨B_S⟩⟩` on copies of the state.
#[pyfunction]
#[pyo3(signature = (state, subset, tail_tol = 1e-12))]
fn multicopy_value(state: &PyState, subset: &Bound<'_, PyAny>, tail_tol: f64) -> PyResult<f64> {
    let b = build_multicopy(&subset_arg(subset)?).map_err(py_err)?;
    let rho = repro::prepare(&state.spec, tail_tol).map_err(py_err)?;
    multicopy_expectation(&rho, &b).map_err(py_err)
}

/// Photon-counting readout of a circuit preset (`d12`, `d14`, `d15`, `d23`,
/// `d123`) on replicas of the state, truncated to the preset's cap.
#[pyfunction]
#[pyo3(signature = (preset, state, tail_tol = 1e-12))]
fn circuit_minor(preset: &str, state: &PyState, tail_tol: f64) -> PyResult<f64> {
    let p = Preset::ALL
        .into_iter()
        .find(|p| p.name() == preset)
        .ok_or_else(|| PyValueError::new_err(format!("unknown preset '{preset}'")))?;
    let rho = repro::prepare(&state.spec, tail_tol).map_err(py_err)?;
    let rho = if rho.cutoff() > p.cutoff_cap() { rho.project(p.cutoff_cap()).map_err(py_err)? } else { rho };
    circuits::circuit_minor(p, &rho).map_err(py_err)
}

/// Two-replica interpolation readout at transmittance `tau`.
#[pyfunction]
#[pyo3(signature = (tau, state, phi = std::f64::consts::FRAC_PI_2, tail_tol = 1e-12))]
fn interpolation_value(tau: f64, state: &PyState, phi: f64, tail_tol: f64) -> PyResult<f64> {
    let rho = repro::prepare(&state.spec, tail_tol).map_err(py_err)?;
    circuits::interpolation_value(tau, phi, &rho).map_err(py_err)
}

#[pyfunction]
fn tau_star() -> f64 {
    circuits::tau_star()
}

/// Runs a reproduction target and returns its summary as a JSON string.
/// With `out` set, the CSV and summary files are written there as well.
#[pyfunction]
#[pyo3(signature = (target, config_json = None, out = None))]
fn run_target(target: &str, config_json: Option<&str>, out: Option<PathBuf>) -> PyResult<String> {
    let target: Target = target.parse().map_err(py_err)?;
    let config = match config_json {
        Some(text) => ReproConfig::from_json(text).map_err(py_err)?,
        None => ReproConfig::default(),
    };
    let report = repro::run(&ReproJob { target, config }).map_err(py_err)?;
    if let Some(dir) = out {
        report.write(&dir).map_err(py_err)?;
    }
    Ok(report.summary().to_string())
}

#[pymodule]
fn nonclass(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(moment_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(principal_minor, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_minor, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_nonclassical, m)?)?;
    m.add_function(wrap_pyfunction!(multicopy_observable, m)?)?;
    m.add_function(wrap_pyfunction!(multicopy_value, m)?)?;
    m.add_function(wrap_pyfunction!(circuit_minor, m)?)?;
    m.add_function(wrap_pyfunction!(interpolation_value, m)?)?;
    m.add_function(wrap_pyfunction!(tau_star, m)?)?;
    m.add_function(wrap_pyfunction!(run_target, m)?)?;
    Ok(())
}
