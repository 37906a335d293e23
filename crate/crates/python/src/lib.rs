//! Python bindings: expressions, plants, configurations, synthesis,
//! simulation and verification.

use std::path::PathBuf;
use std::sync::Arc;

use hysterix_core::backstepping::{compute_k, GlobalController};
use hysterix_core::config::{apply_override, RunConfig, Scenario};
use hysterix_core::expr::{parse, Expr};
use hysterix_core::hybrid::{simulate, HybridArc};
use hysterix_core::hysteresis::Mode;
use hysterix_core::io::{write_trajectory_csv, Diagnostics, RunSummary};
use hysterix_core::plant::{paper_example, preliminary_example, PlantModel};
use hysterix_core::verify::{verify_scenario, VerificationReport};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(hysterix, HysterixError, PyException);

fn err(e: hysterix_core::Error) -> PyErr {
    HysterixError::new_err(e.to_string())
}

/// Converts any serializable value to plain Python objects via `json.loads`.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn mode(q: u8) -> PyResult<Mode> {
    Mode::try_from(q).map_err(|_| PyValueError::new_err(format!("mode must be 1 or 2, got {q}")))
}

/// A parsed expression over named variables.
#[pyclass(name = "Expr", frozen)]
struct PyExpr {
    inner: Expr,
    vars: Vec<String>,
}

#[pymethods]
impl PyExpr {
    #[new]
    fn new(text: &str, vars: Vec<String>) -> PyResult<Self> {
        let inner = parse(text, &vars).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner, vars })
    }

    /// Evaluates with `values[i]` bound to `vars[i]`.
    fn eval(&self, values: Vec<f64>) -> PyResult<f64> {
        if values.len() != self.vars.len() {
            return Err(PyValueError::new_err(format!(
                "expected {} values, got {}",
                self.vars.len(),
                values.len()
            )));
        }
        self.inner.eval_at(&values).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn diff(&self, var: &str) -> PyResult<Self> {
        if !self.vars.iter().any(|v| v == var) {
            return Err(PyValueError::new_err(format!("unknown variable {var:?}")));
        }
        Ok(Self {
            inner: self.inner.differentiate(var),
            vars: self.vars.clone(),
        })
    }

    fn gradient(&self) -> Vec<Self> {
        self.inner
            .gradient(&self.vars)
            .into_iter()
            .map(|inner| Self {
                inner,
                vars: self.vars.clone(),
            })
            .collect()
    }

    fn free_vars(&self) -> Vec<String> {
        self.inner.free_vars()
    }

    #[getter]
    fn vars(&self) -> Vec<String> {
        self.vars.clone()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr({:?})", self.inner.to_string())
    }
}

/// Plant `ẋ₁ = f₁(x) + h₁(x, u)`, `ẋ₂ = f₂(x)u + h₂(x, u)`.
#[pyclass(name = "Plant", frozen)]
struct PyPlant {
    inner: Arc<PlantModel>,
}

#[pymethods]
impl PyPlant {
    #[staticmethod]
    #[pyo3(signature = (theta = 1e-3))]
    fn example(theta: f64) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(paper_example(theta).map_err(err)?),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (theta = 1e-3))]
    fn preliminary(theta: f64) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(preliminary_example(theta).map_err(err)?),
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `ẋ` at state `x` and input `u`.
    fn dynamics(&self, x: Vec<f64>, u: f64) -> PyResult<Vec<f64>> {
        self.inner.eval_dynamics(&x, u).map_err(err)
    }

    fn f2(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.f2_value(&x).map_err(err)
    }
}

/// Run configuration; see the README for the JSON layout.
#[pyclass(name = "Config")]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    /// Defaults when `json` is omitted.
    #[new]
    #[pyo3(signature = (json = None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let inner = match json {
            Some(text) => RunConfig::from_json(text).map_err(err)?,
            None => RunConfig::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, overrides = Vec::new()))]
    fn load(path: PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        let inner = RunConfig::load_with_overrides(Some(&path), &overrides).map_err(err)?;
        Ok(Self { inner })
    }

    /// Applies a `dotted.key=value` override, like `--set` on the CLI.
    fn set(&mut self, assignment: &str) -> PyResult<()> {
        let mut doc = serde_json::to_value(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))?;
        apply_override(&mut doc, assignment).map_err(err)?;
        self.inner = RunConfig::from_value(doc).map_err(err)?;
        Ok(())
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn build(&self) -> PyResult<PyScenario> {
        Ok(PyScenario {
            inner: Arc::new(self.inner.build().map_err(err)?),
            global: None,
        })
    }
}

/// A built configuration: plant, certificates and controllers.
#[pyclass(name = "Scenario")]
struct PyScenario {
    inner: Arc<Scenario>,
    global: Option<Arc<GlobalController>>,
}

impl PyScenario {
    fn global(&mut self) -> PyResult<Arc<GlobalController>> {
        if self.global.is_none() {
            self.global = Some(Arc::new(self.inner.global_controller().map_err(err)?));
        }
        Ok(self.global.clone().unwrap())
    }
}

#[pymethods]
impl PyScenario {
    #[getter]
    fn plant(&self) -> PyPlant {
        PyPlant {
            inner: self.inner.plant.clone(),
        }
    }

    /// Synthesized constants `a, a_prime, a_tilde, k, c, c_g, K_alpha, zeta`.
    fn synthesize(&mut self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let g = self.global()?;
        to_py(py, g.params())
    }

    /// The global feedback `φ_g(x)`.
    fn phi_g(&mut self, x: Vec<f64>) -> PyResult<f64> {
        self.global()?.eval(&x).map_err(err)
    }

    /// Composite Lyapunov function `V(x)` of the global controller.
    fn composite_v(&mut self, x: Vec<f64>) -> PyResult<f64> {
        self.global()?.composite_v(&x).map_err(err)
    }

    /// `V_ℓ(x)` of the local certificate.
    fn v_ell(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.require_local().map_err(err)?.value(&x).map_err(err)
    }

    /// Simulates from `x0` in mode `q0` (1 local, 2 global) with the
    /// configured controller and integrator.
    #[pyo3(signature = (x0, q0 = 1))]
    fn simulate(&mut self, py: Python<'_>, x0: Vec<f64>, q0: u8) -> PyResult<PyArc> {
        let q0 = mode(q0)?;
        let (ctrl, g) = self.inner.controller().map_err(err)?;
        let s = self.inner.clone();
        let arc = py
            .detach(move || simulate(&s.plant, ctrl.as_ref(), &x0, q0, &s.config.integrator))
            .map_err(err)?;
        if let Some(g) = g {
            self.global.get_or_insert(g);
        }
        Ok(PyArc {
            inner: arc,
            scenario: self.inner.clone(),
            k: self.global.as_ref().map(|g| g.params().k),
        })
    }

    /// Runs every check and returns the report.
    fn verify(&self, py: Python<'_>) -> PyResult<PyReport> {
        let s = self.inner.clone();
        let inner = py.detach(move || verify_scenario(&s)).map_err(err)?;
        Ok(PyReport { inner })
    }
}

/// A simulated hybrid solution.
#[pyclass(name = "HybridArc", frozen)]
struct PyArc {
    inner: HybridArc,
    scenario: Arc<Scenario>,
    k: Option<f64>,
}

#[pymethods]
impl PyArc {
    #[getter]
    fn t(&self) -> Vec<f64> {
        self.inner.iter_samples().map(|(h, _, _)| h.t).collect()
    }

    #[getter]
    fn j(&self) -> Vec<usize> {
        self.inner.iter_samples().map(|(h, _, _)| h.j).collect()
    }

    #[getter]
    fn q(&self) -> Vec<u8> {
        self.inner.iter_samples().map(|(_, q, _)| q.into()).collect()
    }

    /// One state vector per sample.
    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        self.inner.iter_samples().map(|(_, _, s)| s.x.clone()).collect()
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.iter_samples().map(|(_, _, s)| s.u).collect()
    }

    #[getter]
    fn termination(&self) -> &'static str {
        self.inner.termination.label()
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.t_final()
    }

    #[getter]
    fn final_state(&self) -> Option<Vec<f64>> {
        self.inner.final_state().map(<[f64]>::to_vec)
    }

    /// `{termination, jumps: [{t, j, q_from, q_to}], t_final}`.
    fn summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &RunSummary::from_arc(&self.inner))
    }

    /// Raises `HysterixError` when the solution record is malformed.
    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(HysterixError::new_err)
    }

    /// The trajectory in the CLI's CSV format.
    fn to_csv(&self) -> PyResult<String> {
        let diag = Diagnostics {
            certificate: self.scenario.certificate.as_deref(),
            k: self.k,
            local: self.scenario.local.as_deref(),
        };
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &self.inner, self.scenario.plant.dim(), &diag).map_err(err)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.iter_samples().count()
    }
}

/// Verification results.
#[pyclass(name = "Report", frozen)]
struct PyReport {
    inner: VerificationReport,
}

#[pymethods]
impl PyReport {
    /// True when every non-advisory entry passes.
    #[getter]
    fn passed(&self) -> bool {
        self.inner.all_pass()
    }

    fn entries(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.entries)
    }

    fn get(&self, py: Python<'_>, name: &str) -> PyResult<Option<Py<PyAny>>> {
        self.inner.get(name).map(|e| to_py(py, e)).transpose()
    }

    fn table(&self) -> String {
        self.inner.to_table()
    }

    fn __str__(&self) -> String {
        self.inner.to_table()
    }
}

/// `k = 2(M + a)/a²`.
#[pyfunction(name = "compute_k")]
fn py_compute_k(m: f64, a: f64) -> PyResult<f64> {
    compute_k(m, a).map_err(err)
}

#[pymodule]
fn hysterix(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HysterixError", m.py().get_type::<HysterixError>())?;
    m.add_class::<PyExpr>()?;
    m.add_class::<PyPlant>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyArc>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(py_compute_k, m)?)?;
    Ok(())
}
