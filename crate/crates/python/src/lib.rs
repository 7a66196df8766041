//! Python module `chaoslab`: covariance models, Hermite expansions, moments,
//! exact variances and the CLT / log-average experiments.

use chaoslab::covmoments::{cov_moment, moment_slope, Radius};
use chaoslab::functionals::{exact_variance, sigma_proxy, DomainSpec};
use chaoslab::hermite::{HermiteExpansion, Observable, MAX_DEGREE};
use chaoslab::limits::{ascl_logaverage, clt_experiment, AsclConfig, CltConfig};
use chaoslab::specialfn::{check_conditions, CovarianceModel, ModelKind};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(e: chaoslab::Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Serializes through JSON into plain Python dicts and lists.
fn to_object<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "CovarianceModel", module = "chaoslab", frozen)]
struct PyModel {
    inner: CovarianceModel,
}

#[pymethods]
impl PyModel {
    /// `kind` is one of berry, exponential, matern, cauchy.
    #[new]
    #[pyo3(signature = (kind, d, alpha=1.0, mu=0.5, beta=1.0, gamma=2.0))]
    fn new(kind: &str, d: usize, alpha: f64, mu: f64, beta: f64, gamma: f64) -> PyResult<Self> {
        let kind = match kind {
            "berry" => ModelKind::Berry,
            "exponential" => ModelKind::Exponential { alpha },
            "matern" => ModelKind::WhittleMatern { mu },
            "cauchy" => ModelKind::Cauchy { beta, gamma },
            other => return Err(PyValueError::new_err(format!("unknown model '{other}'"))),
        };
        Ok(PyModel { inner: CovarianceModel::new(kind, d).map_err(to_py)? })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    fn __call__(&self, r: f64) -> PyResult<f64> {
        chaoslab::specialfn::cov_eval(&self.inner, r).map_err(to_py)
    }

    fn conditions<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &check_conditions(&self.inner).map_err(to_py)?)
    }

    /// `∫ C^q` over the ball of radius `r_max` (all of R^d when `None`).
    #[pyo3(signature = (q, r_max=None, signed=true))]
    fn moment(&self, q: usize, r_max: Option<f64>, signed: bool) -> PyResult<(f64, f64)> {
        let r = r_max.map_or(Radius::Infinite, Radius::Finite);
        let m = cov_moment(&self.inner, q, r, signed).map_err(to_py)?;
        Ok((m.value, m.err))
    }

    /// Log-log slope of `∫_{R^d} C^q` over `q_lo..=q_hi`.
    #[pyo3(signature = (q_lo, q_hi, signed=true))]
    fn moment_slope(&self, q_lo: usize, q_hi: usize, signed: bool) -> PyResult<f64> {
        Ok(moment_slope(&self.inner, q_lo, q_hi, signed).map_err(to_py)?.slope)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("CovarianceModel({})", self.inner)
    }
}

#[pyclass(name = "HermiteExpansion", module = "chaoslab", frozen)]
struct PyExpansion {
    inner: HermiteExpansion,
}

#[pymethods]
impl PyExpansion {
    /// Expansion of an observable spec such as `hermite:2` or `indicator:0.5`.
    #[new]
    #[pyo3(signature = (phi, max_order=None))]
    fn new(phi: &str, max_order: Option<usize>) -> PyResult<Self> {
        let obs = Observable::parse(phi).map_err(to_py)?;
        let order = max_order.unwrap_or_else(|| obs.polynomial_degree().map_or(MAX_DEGREE, |p| p.max(1)));
        Ok(PyExpansion { inner: obs.expansion(order).map_err(to_py)? })
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs.clone()
    }

    /// Hermite rank, `None` when every nonconstant coefficient vanishes.
    #[getter]
    fn rank(&self) -> Option<usize> {
        self.inner.rank.finite()
    }

    fn chaos_weight(&self, q: usize) -> f64 {
        self.inner.chaos_weight(q)
    }

    fn __repr__(&self) -> String {
        format!("HermiteExpansion(order={}, rank={:?})", self.inner.order(), self.inner.rank.finite())
    }
}

fn domain(d: usize, t: f64, shape: &str) -> PyResult<DomainSpec> {
    match shape {
        "ball" => DomainSpec::ball(d, t),
        "box" => DomainSpec::cube(d, t),
        other => return Err(PyValueError::new_err(format!("unknown shape '{other}'"))),
    }
    .map_err(to_py)
}

/// `σ²_{t,N}` broken down by chaos; `n=None` picks the truncation adaptively.
#[pyfunction]
#[pyo3(signature = (model, expansion, t, n=None, shape="ball"))]
fn variance<'py>(
    py: Python<'py>,
    model: &PyModel,
    expansion: &PyExpansion,
    t: f64,
    n: Option<usize>,
    shape: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let dom = domain(model.inner.d, t, shape)?;
    let b = match n {
        Some(n) => exact_variance(&model.inner, &expansion.inner, &dom, n),
        None => sigma_proxy(&model.inner, &expansion.inner, &dom, expansion.inner.rank.finite().unwrap_or(1))
            .map(|(b, _)| b),
    }
    .map_err(to_py)?;
    to_object(py, &b)
}

/// Runs a CLT experiment from a JSON config; returns the report as a dict.
#[pyfunction]
fn clt<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg: CltConfig = from_json(config_json)?;
    let rep = py.detach(|| clt_experiment(&cfg)).map_err(to_py)?;
    to_object(py, &rep)
}

/// Runs a log-average experiment from a JSON config.
#[pyfunction]
fn ascl<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg: AsclConfig = from_json(config_json)?;
    let rows = py.detach(|| ascl_logaverage(&cfg)).map_err(to_py)?;
    to_object(py, &rows)
}

#[pymodule]
#[pyo3(name = "chaoslab")]
fn chaoslab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyExpansion>()?;
    m.add_function(wrap_pyfunction!(variance, m)?)?;
    m.add_function(wrap_pyfunction!(clt, m)?)?;
    m.add_function(wrap_pyfunction!(ascl, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
