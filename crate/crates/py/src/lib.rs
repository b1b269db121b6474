//! Python bindings: descriptors, contour inversion, series, saddle-point
//! leading terms, condition checks, Monte Carlo and method comparison.

use pyo3::exceptions::{PyNotImplementedError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use invsub_core::compare::{run_compare, CompareConfig};
use invsub_core::conditions::{self, ConditionReport};
use invsub_core::config::{compile_expr, descriptor_from_json};
use invsub_core::mc::{estimate_inverse_density, SimulationConfig};
use invsub_core::saddle::{asymptotic_g, SaddleSolution};
use invsub_core::series::SeriesEngine;
use invsub_core::{contour, BernsteinDescriptor, ContourSpec, DensityQuery, Error, MethodResult, Target, C64};

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Domain(_) | Error::Config { .. } => PyValueError::new_err(msg),
        Error::Capability(_) => PyNotImplementedError::new_err(msg),
        _ => PyRuntimeError::new_err(msg),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_pyobject(py)?.into_any(),
            (_, Some(i)) => i.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn parse_target(target: &str) -> PyResult<Target> {
    target.parse().map_err(py_err)
}

/// A Laplace exponent Φ.
#[pyclass(name = "Descriptor", module = "invsub", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDescriptor {
    inner: BernsteinDescriptor,
}

#[pymethods]
impl PyDescriptor {
    /// Parses a descriptor JSON document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: descriptor_from_json(text).map_err(py_err)?,
        })
    }

    /// Φ(z) = z^α.
    #[staticmethod]
    fn stable(alpha: f64) -> PyResult<Self> {
        Ok(Self {
            inner: BernsteinDescriptor::stable(alpha).map_err(py_err)?,
        })
    }

    /// Φ(z) = (λ + z)^α − λ^α.
    #[staticmethod]
    fn tempered_stable(alpha: f64, lam: f64) -> PyResult<Self> {
        Ok(Self {
            inner: BernsteinDescriptor::tempered_stable(alpha, lam).map_err(py_err)?,
        })
    }

    /// Φ(z) = ln(1 + z).
    #[staticmethod]
    fn gamma() -> Self {
        Self {
            inner: BernsteinDescriptor::gamma(),
        }
    }

    /// Φ(z) = rate·(1 − e^{−size·z}).
    #[staticmethod]
    fn point_jump(rate: f64, size: f64) -> PyResult<Self> {
        Ok(Self {
            inner: BernsteinDescriptor::point_jump(rate, size).map_err(py_err)?,
        })
    }

    /// Φ(z) = q + b z.
    #[staticmethod]
    #[pyo3(signature = (drift, kill = 0.0))]
    fn drift_only(drift: f64, kill: f64) -> PyResult<Self> {
        Ok(Self {
            inner: BernsteinDescriptor::drift_only(drift, kill).map_err(py_err)?,
        })
    }

    fn add_drift(&self, b: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.clone().add_drift(b).map_err(py_err)?,
        })
    }

    fn add_kill(&self, q: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.clone().add_kill(q).map_err(py_err)?,
        })
    }

    fn phi(&self, z: C64) -> PyResult<C64> {
        self.inner.phi(z).map_err(py_err)
    }

    /// n-th derivative of Φ, n ∈ {1, 2, 3}.
    fn deriv(&self, n: u8, z: C64) -> PyResult<C64> {
        self.inner.deriv(n, z).map_err(py_err)
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label.clone()
    }

    #[getter]
    fn drift(&self) -> f64 {
        self.inner.drift
    }

    #[getter]
    fn kill_rate(&self) -> f64 {
        self.inner.kill_rate
    }

    fn __repr__(&self) -> String {
        format!("Descriptor({})", self.inner.label)
    }
}

fn result_dict<'py>(py: Python<'py>, r: &MethodResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("value", r.value)?;
    d.set_item("error_scale", r.error_scale)?;
    d.set_item("mantissa", r.mantissa)?;
    d.set_item("log_scale", r.log_scale)?;
    d.set_item("method", r.method.as_str())?;
    let diag = PyDict::new(py);
    for (k, v) in &r.diagnostics {
        diag.set_item(k, json_to_py(py, v)?)?;
    }
    d.set_item("diagnostics", diag)?;
    Ok(d)
}

fn contour_spec(method: &str, tol: f64) -> PyResult<ContourSpec> {
    let spec = match method {
        "bromwich" => ContourSpec::bromwich(),
        "keyhole" => ContourSpec::keyhole(),
        "halfplane" => ContourSpec::halfplane(),
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    Ok(spec.with_tol(tol))
}

/// ∂_x^k ∂_t^l of a target density by contour inversion.
#[pyfunction]
#[pyo3(signature = (phi, target, x, t, k = 0, l = 0, method = "bromwich", tol = 1e-11))]
#[allow(clippy::too_many_arguments)]
fn invert<'py>(
    py: Python<'py>,
    phi: &PyDescriptor,
    target: &str,
    x: f64,
    t: f64,
    k: u32,
    l: u32,
    method: &str,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let query = DensityQuery::new(parse_target(target)?, x, t).with_orders(k, l);
    let spec = contour_spec(method, tol)?;
    let phi = &phi.inner;
    let r = py.detach(|| contour::invert(phi, &query, &spec)).map_err(py_err)?;
    result_dict(py, &r)
}

/// The same quantity from its power series in x.
#[pyfunction]
#[pyo3(signature = (phi, target, x, t, k = 0, l = 0, nmax = 400, tol = 1e-15))]
#[allow(clippy::too_many_arguments)]
fn series<'py>(
    py: Python<'py>,
    phi: &PyDescriptor,
    target: &str,
    x: f64,
    t: f64,
    k: u32,
    l: u32,
    nmax: u32,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let query = DensityQuery::new(parse_target(target)?, x, t).with_orders(k, l);
    let phi = &phi.inner;
    let r = py
        .detach(|| {
            let engine = SeriesEngine::new(phi)?;
            match query.target {
                Target::F => engine.series_f(&query, nmax, tol),
                _ => engine.series_g(&query, nmax, tol),
            }
        })
        .map_err(py_err)?;
    result_dict(py, &r)
}

fn saddle_dict<'py>(py: Python<'py>, s: &SaddleSolution) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("c", s.c)?;
    d.set_item("regime", s.regime.as_str())?;
    d.set_item("leading", s.leading)?;
    d.set_item("mantissa", s.mantissa)?;
    d.set_item("log_scale", s.log_scale)?;
    d.set_item("error_scale", s.error_scale)?;
    Ok(d)
}

/// Saddle-point leading term.
#[pyfunction]
#[pyo3(signature = (phi, target, x, t, k = 0, l = 0))]
fn saddle<'py>(
    py: Python<'py>,
    phi: &PyDescriptor,
    target: &str,
    x: f64,
    t: f64,
    k: u32,
    l: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let query = DensityQuery::new(parse_target(target)?, x, t).with_orders(k, l);
    let s = asymptotic_g(&phi.inner, &query).map_err(py_err)?;
    saddle_dict(py, &s)
}

fn report_dict<'py>(py: Python<'py>, r: &ConditionReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("condition_id", r.condition_id.as_str())?;
    d.set_item("verdict", r.verdict.as_str())?;
    d.set_item("estimate", r.estimate)?;
    d.set_item("trend", r.trend)?;
    d.set_item("probe_grid", r.probe_grid.clone())?;
    d.set_item("ratio_values", r.ratio_values.clone())?;
    d.set_item("extra", r.extra.clone())?;
    Ok(d)
}

/// One of a1, a2, a2prime, a2star, dr, sandwich, addcondi. `schedule` is
/// an expression in x, required by addcondi.
#[pyfunction]
#[pyo3(signature = (phi, name, grid = None, schedule = None, sandwich_tol = 1e-8))]
fn check_condition<'py>(
    py: Python<'py>,
    phi: &PyDescriptor,
    name: &str,
    grid: Option<Vec<f64>>,
    schedule: Option<&str>,
    sandwich_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let phi = &phi.inner;
    let grid_or = |default: fn() -> Vec<f64>| grid.clone().unwrap_or_else(default);
    let at_inf = conditions::default_grid;
    let r = match name {
        "a1" => conditions::check_a1(phi, &grid_or(at_inf)),
        "a2" => conditions::check_a2(phi, &grid_or(at_inf), false),
        "a2prime" => conditions::check_a2(phi, &grid_or(conditions::default_grid_at_zero), true),
        "a2star" => conditions::check_a2star_and_dr(phi, &grid_or(at_inf)).map(|p| p.0),
        "dr" => conditions::check_a2star_and_dr(phi, &grid_or(at_inf)).map(|p| p.1),
        "sandwich" => conditions::check_phi2_sandwich(phi, &grid_or(at_inf), sandwich_tol),
        "addcondi" => {
            let src = schedule.ok_or_else(|| PyValueError::new_err("addcondi needs a schedule"))?;
            let f = compile_expr(src, "x", "schedule").map_err(py_err)?;
            conditions::check_add_condi(phi, &|x| f(x), &grid_or(at_inf))
        }
        other => return Err(PyValueError::new_err(format!("unknown condition '{other}'"))),
    }
    .map_err(py_err)?;
    report_dict(py, &r)
}

/// Kernel estimates of f, f_c and f_k on `grid` at time t.
#[pyfunction]
#[pyo3(signature = (phi, t, grid, paths = 100_000, seed = 42, ci_level = 0.95))]
fn simulate<'py>(
    py: Python<'py>,
    phi: &PyDescriptor,
    t: f64,
    grid: Vec<f64>,
    paths: u64,
    seed: u64,
    ci_level: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let mut config = SimulationConfig::default().with_paths(paths).with_seed(seed);
    config.ci_level = ci_level;
    let phi = &phi.inner;
    let est = py
        .detach(|| estimate_inverse_density(phi, t, &grid, &config))
        .map_err(py_err)?;
    let v = serde_json::to_value(&est).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// Runs a comparison config (JSON text); one dict per (x, t) point.
#[pyfunction]
fn compare<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = CompareConfig::from_json(config).map_err(py_err)?;
    let rows = py.detach(|| run_compare(&cfg)).map_err(py_err)?;
    let v = serde_json::to_value(&rows).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

#[pymodule]
fn invsub(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDescriptor>()?;
    m.add_function(wrap_pyfunction!(invert, m)?)?;
    m.add_function(wrap_pyfunction!(series, m)?)?;
    m.add_function(wrap_pyfunction!(saddle, m)?)?;
    m.add_function(wrap_pyfunction!(check_condition, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
