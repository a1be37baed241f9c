//! Python bindings for `monodual`.
//!
//! Reports come back as plain dicts (built from the JSON form of the Rust
//! report types). Input problems raise `ValueError`; numerical failures
//! raise `RuntimeError`.

use monodual::dualgen::{dual_convergence, dual_generator_coeffs, CompensatorConvention, DualGeneratorCoeffs, TestFunction};
use monodual::generator::{check_levy_monotone, classify_boundary, discretize, validate_model, Lattice, LEVY_MONO_TOL};
use monodual::qmatrix::{
    check_monotone_with_tol, check_stochastic_dominance, default_margin, dual_qmatrix, transition_matrix,
    validate_qmatrix, verify_duality_with_margin, Boundary, QMatrixError, TOL_MONO,
};
use monodual::simulate::{mc_duality_check, mc_growth_bound, mc_survival, sample_path, SimError};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    PyModule::import(py, "json")?.call_method1("loads", (s,))
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn qmatrix_err(e: QMatrixError) -> PyErr {
    match e {
        QMatrixError::NotSubstochastic { .. } => runtime_err(e),
        _ => value_err(e),
    }
}

fn sim_err(e: SimError) -> PyErr {
    match e {
        SimError::QMatrix(e) => qmatrix_err(e),
        _ => value_err(e),
    }
}

fn boundary(s: &str) -> PyResult<Boundary> {
    s.parse().map_err(value_err)
}

/// Banded rate matrix on a finite window of integer states.
#[pyclass(module = "monodual_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct RateMatrix {
    inner: monodual::qmatrix::RateMatrix,
}

#[pymethods]
impl RateMatrix {
    /// `rates` is a list of `(n, m, rate)`: jump from `n` to `n + m`.
    #[new]
    #[pyo3(signature = (lo, hi, boundary = "reflect", rates = Vec::new()))]
    fn new(lo: i64, hi: i64, boundary: &str, rates: Vec<(i64, i64, f64)>) -> PyResult<Self> {
        let mut q = monodual::qmatrix::RateMatrix::new(lo, hi, self::boundary(boundary)?).map_err(qmatrix_err)?;
        for (n, m, r) in rates {
            q.add_rate(n, m, r).map_err(qmatrix_err)?;
        }
        Ok(Self { inner: q })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let inner = monodual::qmatrix::RateMatrix::from_json(s).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn lo(&self) -> i64 {
        self.inner.lo()
    }

    #[getter]
    fn hi(&self) -> i64 {
        self.inner.hi()
    }

    #[getter]
    fn boundary(&self) -> String {
        format!("{:?}", self.inner.boundary()).to_lowercase()
    }

    fn rate(&self, n: i64, m: i64) -> f64 {
        self.inner.rate(n, m)
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &validate_qmatrix(&self.inner).map_err(qmatrix_err)?)
    }

    #[pyo3(signature = (tol = TOL_MONO))]
    fn check_monotone<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &check_monotone_with_tol(&self.inner, tol))
    }

    /// Raises `ValueError` when the chain is not monotone.
    fn dual(&self) -> PyResult<Self> {
        Ok(Self {
            inner: dual_qmatrix(&self.inner).map_err(qmatrix_err)?,
        })
    }

    /// `exp(tQ)` as a list of rows.
    fn transition_matrix(&self, t: f64) -> PyResult<Vec<Vec<f64>>> {
        let p = transition_matrix(&self.inner, t, 1e-13).map_err(qmatrix_err)?;
        Ok(p.p.rows().into_iter().map(|r| r.to_vec()).collect())
    }

    #[pyo3(signature = (t, tol = 1e-10))]
    fn check_dominance<'py>(&self, py: Python<'py>, t: f64, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        let p = transition_matrix(&self.inner.with_cemeteries(), t, 1e-13).map_err(qmatrix_err)?;
        to_py(py, &check_stochastic_dominance(&p, tol))
    }

    #[pyo3(signature = (t, tol = 1e-8, margin = None))]
    fn verify_duality<'py>(&self, py: Python<'py>, t: f64, tol: f64, margin: Option<i64>) -> PyResult<Bound<'py, PyAny>> {
        let margin = margin.unwrap_or_else(|| default_margin(&self.inner));
        to_py(py, &verify_duality_with_margin(&self.inner, t, tol, margin).map_err(qmatrix_err)?)
    }

    #[pyo3(signature = (x0, t, seed = 0))]
    fn sample_path<'py>(&self, py: Python<'py>, x0: i64, t: f64, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &sample_path(&self.inner, x0, t, seed).map_err(sim_err)?)
    }

    #[pyo3(signature = (x0, y, t, reps = 10_000, seed = 0))]
    fn mc_survival<'py>(&self, py: Python<'py>, x0: i64, y: i64, t: f64, reps: u64, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &mc_survival(&self.inner, x0, y, t, reps, seed).map_err(sim_err)?)
    }

    #[pyo3(signature = (pairs, t, reps = 10_000, seed = 0))]
    fn mc_duality<'py>(&self, py: Python<'py>, pairs: Vec<(i64, i64)>, t: f64, reps: u64, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &mc_duality_check(&self.inner, &pairs, t, reps, seed).map_err(sim_err)?)
    }

    fn __repr__(&self) -> String {
        format!("RateMatrix(lo={}, hi={}, boundary='{}')", self.inner.lo(), self.inner.hi(), self.boundary())
    }
}

/// Lévy-type model built from its JSON description.
#[pyclass(module = "monodual_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct LevyModel {
    inner: monodual::generator::LevyModel,
}

#[pymethods]
impl LevyModel {
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let inner = monodual::generator::LevyModel::from_json(s).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn validate<'py>(&self, py: Python<'py>, grid: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &validate_model(&self.inner, &grid).map_err(value_err)?)
    }

    #[pyo3(signature = (grid, thresholds, tol = LEVY_MONO_TOL))]
    fn check_monotone<'py>(&self, py: Python<'py>, grid: Vec<f64>, thresholds: Vec<f64>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &check_levy_monotone(&self.inner, &grid, &thresholds, tol).map_err(value_err)?)
    }

    /// Lattice chain on `h·[lo, hi]`.
    #[pyo3(signature = (h, lo, hi, boundary = "reflect"))]
    fn discretize(&self, h: f64, lo: i64, hi: i64, boundary: &str) -> PyResult<RateMatrix> {
        let lat = Lattice::new(h, lo, hi, self::boundary(boundary)?).map_err(value_err)?;
        Ok(RateMatrix {
            inner: discretize(&self.inner, &lat).map_err(value_err)?,
        })
    }

    fn classify_boundary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &classify_boundary(&self.inner, None))
    }

    #[pyo3(signature = (h, lo, hi, x0, t, c, reps = 10_000, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn mc_growth<'py>(
        &self,
        py: Python<'py>,
        h: f64,
        lo: i64,
        hi: i64,
        x0: f64,
        t: f64,
        c: f64,
        reps: u64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let lat = Lattice::new(h, lo, hi, Boundary::Reflect).map_err(value_err)?;
        to_py(py, &mc_growth_bound(&self.inner, &lat, x0, t, c, reps, seed).map_err(sim_err)?)
    }
}

/// Coefficients of the dual generator of a monotone model.
#[pyclass(module = "monodual_py", frozen)]
struct DualGenerator {
    model: monodual::generator::LevyModel,
    coeffs: DualGeneratorCoeffs,
}

#[pymethods]
impl DualGenerator {
    #[new]
    fn new(model: &LevyModel) -> PyResult<Self> {
        let coeffs = dual_generator_coeffs(&model.inner).map_err(value_err)?;
        Ok(Self {
            model: model.inner.clone(),
            coeffs,
        })
    }

    /// Dual jump density `ν̃(x, y)` for `y > 0`.
    fn nu_tilde(&self, x: f64, y: f64) -> PyResult<f64> {
        self.coeffs.nu_tilde(x, y).map_err(value_err)
    }

    fn table<'py>(&self, py: Python<'py>, xs: Vec<f64>, ys: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.coeffs.tabulate(&xs, &ys).map_err(value_err)?)
    }

    /// Lattice dual against the continuum dual on a Gaussian bump.
    #[pyo3(signature = (xs, hs, convention = "jump_size"))]
    fn convergence<'py>(&self, py: Python<'py>, xs: Vec<f64>, hs: Vec<f64>, convention: &str) -> PyResult<Bound<'py, PyAny>> {
        let convention: CompensatorConvention = convention.parse().map_err(value_err)?;
        let r = dual_convergence(&self.model, &TestFunction::gaussian_bump(), &xs, &hs, convention).map_err(runtime_err)?;
        to_py(py, &r)
    }
}

#[pymodule]
fn monodual_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<RateMatrix>()?;
    m.add_class::<LevyModel>()?;
    m.add_class::<DualGenerator>()?;
    Ok(())
}
