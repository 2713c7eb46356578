//! Python bindings: nonlinearity, ODE reference, solver, self-similar frames
//! and the simulate/analyze/report pipeline.

use std::path::PathBuf;

use blowup::config::RunConfig;
use blowup::grid::RadialGrid;
use blowup::selfsimilar::{to_frame, FrameSpec, SelfSimilarFrame};
use blowup::solver::{estimate_t, log_gaps, PhiSolver, RunLimits, Snapshot, SolverOptions};
use blowup::{diagnostics, ode, pipeline, Error, Nonlinearity};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config { .. } | Error::Domain(_) => PyValueError::new_err(e.to_string()),
        Error::Io { .. } | Error::MissingArtifacts(_) | Error::WouldOverwrite(_) => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Nonlinearity", module = "blowup_lab", skip_from_py_object)]
#[derive(Clone, Copy)]
pub struct PyNonlinearity {
    inner: Nonlinearity,
}

#[pymethods]
impl PyNonlinearity {
    /// f(u) = exp(u^p) u^q.
    #[new]
    #[pyo3(signature = (p = 2.0, q = 0.0))]
    fn new(p: f64, q: f64) -> PyResult<Self> {
        Ok(PyNonlinearity {
            inner: Nonlinearity::super_exponential(p, q).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn exponential_reference() -> Self {
        PyNonlinearity {
            inner: Nonlinearity::exponential_reference(),
        }
    }

    #[staticmethod]
    fn power_reference(p: f64) -> PyResult<Self> {
        Ok(PyNonlinearity {
            inner: Nonlinearity::power_reference(p).map_err(py_err)?,
        })
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q()
    }

    fn f(&self, u: f64) -> PyResult<f64> {
        self.inner.f(u).map_err(py_err)
    }

    fn log_f(&self, u: f64) -> PyResult<f64> {
        self.inner.log_f(u).map_err(py_err)
    }

    /// log F(u), F(u) = ∫_u^∞ ds / f(s).
    fn log_big_f(&self, u: f64) -> PyResult<f64> {
        self.inner.ln_big_f(u).map_err(py_err)
    }

    /// F⁻¹(e^{log_y}).
    fn f_inv_log(&self, log_y: f64) -> PyResult<f64> {
        self.inner.f_inv_log(log_y).map_err(py_err)
    }

    fn fprime_f(&self, u: f64) -> PyResult<f64> {
        self.inner.fprime_f(u).map_err(py_err)
    }

    fn one_minus_fprime_f(&self, u: f64) -> PyResult<f64> {
        self.inner.one_minus_fprime_f(u).map_err(py_err)
    }

    fn threshold_l(&self) -> f64 {
        self.inner.threshold_l()
    }

    /// The special-function property suite as a list of dicts.
    fn function_suite<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &diagnostics::function_suite(&self.inner).map_err(py_err)?)
    }

    fn __repr__(&self) -> String {
        format!("Nonlinearity({:?}, p={}, q={})", self.inner.family(), self.inner.p(), self.inner.q())
    }
}

/// Integrates y' = f(y) from y0 until y ≥ stop; returns dict of t, y, log_gap.
#[pyfunction]
#[pyo3(signature = (nl, y0, stop, tol = 1e-10))]
fn ode_integrate<'py>(
    py: Python<'py>,
    nl: PyRef<'_, PyNonlinearity>,
    y0: f64,
    stop: f64,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let run = ode::ode_integrate(&nl.inner, y0, stop, tol).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("blowup_time", run.blowup_time.exp())?;
    d.set_item("t", run.samples.iter().map(|s| s.t).collect::<Vec<_>>())?;
    d.set_item("y", run.samples.iter().map(|s| s.y).collect::<Vec<_>>())?;
    d.set_item("log_gap", run.samples.iter().map(|s| s.log_gap).collect::<Vec<_>>())?;
    Ok(d)
}

#[pyclass(name = "Snapshot", module = "blowup_lab", frozen)]
pub struct PySnapshot {
    inner: Snapshot,
}

#[pymethods]
impl PySnapshot {
    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn phi(&self) -> Vec<f64> {
        self.inner.phi.clone()
    }

    #[getter]
    fn umax(&self) -> f64 {
        self.inner.umax
    }

    #[getter]
    fn step_index(&self) -> u64 {
        self.inner.step_index
    }
}

#[pyclass(name = "Frame", module = "blowup_lab", frozen)]
pub struct PyFrame {
    inner: SelfSimilarFrame,
}

#[pymethods]
impl PyFrame {
    #[getter]
    fn s(&self) -> f64 {
        self.inner.s
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y_nodes.clone()
    }

    #[getter]
    fn v(&self) -> Vec<f64> {
        self.inner.v.clone()
    }

    #[getter]
    fn truncated(&self) -> bool {
        self.inner.truncated
    }

    /// sup_{|y| ≤ c} |v − 1|.
    fn sup_deviation(&self, c: f64) -> f64 {
        self.inner.sup_deviation(c)
    }
}

/// Explicit Φ-space solver on the ball of radius `radius` in `n` dimensions.
#[pyclass(name = "Solver", module = "blowup_lab")]
pub struct PySolver {
    inner: PhiSolver,
    snapshots: Vec<Snapshot>,
}

#[pymethods]
impl PySolver {
    #[new]
    #[pyo3(signature = (nl, n, radius, cells, u0))]
    fn new(nl: PyRef<'_, PyNonlinearity>, n: u32, radius: f64, cells: usize, u0: Vec<f64>) -> PyResult<Self> {
        let grid = RadialGrid::new(n, radius, cells).map_err(py_err)?;
        Ok(PySolver {
            inner: PhiSolver::new(nl.inner, grid, &u0, SolverOptions::default()).map_err(py_err)?,
            snapshots: Vec::new(),
        })
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn phi_max(&self) -> f64 {
        self.inner.phi_max()
    }

    #[getter]
    fn phi(&self) -> Vec<f64> {
        self.inner.phi().to_vec()
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.u().to_vec()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.grid().nodes()
    }

    /// One controlled step; returns the dt taken.
    fn step(&mut self) -> PyResult<f64> {
        Ok(self.inner.step().map_err(py_err)?.dt)
    }

    fn advance_to(&mut self, t_end: f64) -> PyResult<()> {
        self.inner.advance_to(t_end).map_err(py_err)
    }

    /// Runs until Φmax ≥ phi_stop, keeping the snapshots; returns their count.
    #[pyo3(signature = (phi_stop, spacing = 1.0))]
    fn run_to_blowup(&mut self, phi_stop: f64, spacing: f64) -> PyResult<usize> {
        let limits = RunLimits {
            phi_stop,
            snapshot_spacing: spacing,
            ..RunLimits::default()
        };
        self.snapshots = self.inner.run_to_blowup(&limits).map_err(py_err)?;
        Ok(self.snapshots.len())
    }

    fn snapshots(&self) -> Vec<PySnapshot> {
        self.snapshots.iter().map(|s| PySnapshot { inner: s.clone() }).collect()
    }

    /// Blow-up time estimate from the kept snapshots, as a dict.
    fn estimate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &estimate_t(&self.snapshots).map_err(py_err)?)
    }

    /// Self-similar frames of every kept snapshot with s > 0.
    #[pyo3(signature = (alpha, resolution = 256, y_max = 8.0))]
    fn frames(&self, alpha: f64, resolution: usize, y_max: f64) -> PyResult<Vec<PyFrame>> {
        let est = estimate_t(&self.snapshots).map_err(py_err)?;
        let gaps = log_gaps(&self.snapshots, &est);
        let spec = FrameSpec { alpha, resolution, y_max };
        let grid = *self.inner.grid();
        self.snapshots
            .iter()
            .zip(&gaps)
            .filter(|(_, g)| **g < 0.0)
            .map(|(s, g)| Ok(PyFrame { inner: to_frame(&grid, s, *g, &spec).map_err(py_err)? }))
            .collect()
    }
}

fn load_config(path: PathBuf, overrides: Vec<String>) -> PyResult<RunConfig> {
    let mut cfg = RunConfig::load(&path).map_err(py_err)?;
    for o in &overrides {
        cfg = cfg.with_override(o).map_err(py_err)?;
    }
    Ok(cfg)
}

/// Runs the configured simulation into `out`; returns the snapshot count.
#[pyfunction]
#[pyo3(signature = (config, out, force = false, overrides = Vec::new()))]
fn simulate(config: PathBuf, out: PathBuf, force: bool, overrides: Vec<String>) -> PyResult<usize> {
    let cfg = load_config(config, overrides)?;
    Ok(pipeline::simulate(&cfg, &out, force).map_err(py_err)?.snapshots)
}

#[pyfunction]
#[pyo3(signature = (out, overrides = Vec::new()))]
fn analyze(out: PathBuf, overrides: Vec<String>) -> PyResult<usize> {
    Ok(pipeline::analyze(&out, &overrides).map_err(py_err)?.frames)
}

/// Evaluates the diagnostics of an analysed run; returns the report dict.
#[pyfunction]
fn report(py: Python<'_>, out: PathBuf) -> PyResult<Bound<'_, PyAny>> {
    json_to_py(py, &pipeline::report(&out).map_err(py_err)?)
}

#[pymodule]
fn blowup_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNonlinearity>()?;
    m.add_class::<PySolver>()?;
    m.add_class::<PySnapshot>()?;
    m.add_class::<PyFrame>()?;
    m.add_function(wrap_pyfunction!(ode_integrate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    Ok(())
}
