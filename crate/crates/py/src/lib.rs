//! Python bindings. Scenarios go in as file text or JSON, metrics come back
//! as objects with plain float getters.

use dtsim_core::catalog::{self, Catalog};
use dtsim_core::optimizer::min_cost_config;
use dtsim_core::report::{emit_table, regenerate, TableFormat, TablePreset};
use dtsim_core::run_model::{self, GrowthRates};
use dtsim_core::scenario::Scenario as CoreScenario;
use dtsim_core::{efficiency, policy, EfficiencyParams, Error, ScenarioMode};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(
    dtsim,
    InfeasibleError,
    PyException,
    "Well-formed request that no configuration satisfies."
);

fn to_py(e: Error) -> PyErr {
    if e.is_infeasible() {
        InfeasibleError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn mode(name: &str) -> PyResult<ScenarioMode> {
    ScenarioMode::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown scenario mode `{name}`")))
}

fn params(scenario: &str) -> PyResult<EfficiencyParams> {
    Ok(EfficiencyParams::default().with_scenario(mode(scenario)?))
}

fn catalog() -> PyResult<Catalog> {
    Catalog::load().map_err(to_py)
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string_pretty(v).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "RunMetrics", frozen)]
pub struct PyRunMetrics {
    inner: run_model::RunMetrics,
}

#[pymethods]
impl PyRunMetrics {
    #[getter]
    fn n_params(&self) -> f64 {
        self.inner.n_params
    }
    #[getter]
    fn c_throughput(&self) -> f64 {
        self.inner.c_throughput
    }
    #[getter]
    fn c_local(&self) -> f64 {
        self.inner.c_local
    }
    #[getter]
    fn c_quality(&self) -> f64 {
        self.inner.c_quality
    }
    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta.eta
    }
    #[getter]
    fn eta_h(&self) -> f64 {
        self.inner.eta.eta_h
    }
    #[getter]
    fn eta_comp(&self) -> f64 {
        self.inner.eta.eta_comp
    }
    #[getter]
    fn eta_rep(&self) -> f64 {
        self.inner.eta.eta_rep
    }
    #[getter]
    fn eta_act(&self) -> f64 {
        self.inner.eta.eta_act
    }
    #[getter]
    fn chi(&self) -> f64 {
        self.inner.chi
    }
    #[getter]
    fn ot(&self) -> f64 {
        self.inner.ot
    }
    #[getter]
    fn cost(&self) -> Option<f64> {
        self.inner.cost
    }
    /// Mean per-node traffic in Mbit/s.
    #[getter]
    fn traffic_mbps(&self) -> f64 {
        self.inner.traffic.average_traffic_bps / 1e6
    }
    #[getter]
    fn compute_bound(&self) -> bool {
        self.inner.traffic.compute_bound
    }
    #[getter]
    fn expected_failures(&self) -> f64 {
        self.inner.expected_failures
    }
    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "RunMetrics(n_params={:.3e}, c_local={:.3e}, eta={:.4}, chi={:.4})",
            self.inner.n_params, self.inner.c_local, self.inner.eta.eta, self.inner.chi
        )
    }
}

#[pyclass(name = "Scenario")]
pub struct PyScenario {
    inner: CoreScenario,
}

#[pymethods]
impl PyScenario {
    /// Empty scenario: every key at its default.
    #[new]
    fn new() -> Self {
        PyScenario {
            inner: CoreScenario::default(),
        }
    }

    /// Parse `key = value` scenario text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: CoreScenario::parse(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_json(body: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: CoreScenario::from_json(body).map_err(to_py)?,
        })
    }

    fn to_file(&self) -> String {
        self.inner.to_file()
    }

    #[pyo3(signature = (scenario_mode=None, duration_days=None, regime=None))]
    fn override_with(
        &mut self,
        scenario_mode: Option<&str>,
        duration_days: Option<f64>,
        regime: Option<&str>,
    ) -> PyResult<()> {
        let m = scenario_mode.map(mode).transpose()?;
        self.inner.override_with(m, duration_days, regime);
        Ok(())
    }

    fn simulate(&self) -> PyResult<PyRunMetrics> {
        let cfg = self.inner.to_run_config(&catalog()?).map_err(to_py)?;
        Ok(PyRunMetrics {
            inner: dtsim_core::simulate(&cfg).map_err(to_py)?,
        })
    }

    /// Cheapest configuration reaching `optimize.target_flop`, as JSON.
    fn optimize(&self, py: Python<'_>) -> PyResult<String> {
        let req = self.inner.to_optimization_request(&catalog()?).map_err(to_py)?;
        let best = py.detach(|| min_cost_config(&req)).map_err(to_py)?;
        json(&best)
    }
}

#[pyfunction]
#[pyo3(signature = (n_params, h, scenario="expected"))]
fn sync_penalty(n_params: f64, h: u32, scenario: &str) -> PyResult<f64> {
    Ok(efficiency::sync_penalty(n_params, h, &params(scenario)?))
}

#[pyfunction]
#[pyo3(signature = (stages, scenario="expected"))]
fn activation_penalty(stages: u32, scenario: &str) -> PyResult<f64> {
    Ok(efficiency::activation_penalty(stages, &params(scenario)?))
}

/// Longest worthwhile run in days for annual growth rates given as fractions.
#[pyfunction]
fn max_training_time(g_h: f64, g_s: f64, g_i: f64) -> PyResult<f64> {
    run_model::max_training_time(&GrowthRates { g_h, g_s, g_i }).map_err(to_py)
}

#[pyfunction]
fn expected_hardware_failures(total_chips: f64, duration_days: f64) -> f64 {
    run_model::expected_hardware_failures(total_chips, duration_days)
}

#[pyfunction]
fn cluster_cost(node: &str, n_nodes: u32) -> PyResult<f64> {
    let spec = catalog()?.lookup_preset(node).map_err(to_py)?;
    catalog::cluster_cost(&spec, n_nodes).map_err(to_py)
}

#[pyfunction]
fn h100_equivalents(node: &str) -> PyResult<f64> {
    Ok(catalog()?.lookup_preset(node).map_err(to_py)?.h100_equivalents())
}

#[pyfunction]
fn node_registrable(node: &str, regime: &str) -> PyResult<bool> {
    let spec = catalog()?.lookup_preset(node).map_err(to_py)?;
    let r = policy::regime(regime).map_err(to_py)?;
    Ok(policy::node_registrable(&spec, &r).registrable)
}

#[pyfunction]
fn node_names() -> PyResult<Vec<String>> {
    Ok(catalog()?.nodes().iter().map(|n| n.name.clone()).collect())
}

#[pyfunction]
fn regimes() -> Vec<String> {
    policy::builtin_regimes().into_iter().map(|r| r.name).collect()
}

/// Regenerate `table1` or `table2` in text, csv, json or markdown.
#[pyfunction]
#[pyo3(signature = (preset, format="text", scenario=None))]
fn table(py: Python<'_>, preset: &str, format: &str, scenario: Option<&PyScenario>) -> PyResult<String> {
    let preset: TablePreset = preset.parse().map_err(to_py)?;
    let format: TableFormat = format.parse().map_err(PyValueError::new_err)?;
    let sc = scenario.map(|s| s.inner.clone()).unwrap_or_default();
    let cat = catalog()?;
    let rows = py.detach(|| regenerate(preset, &sc, &cat)).map_err(to_py)?;
    Ok(emit_table(&rows, format))
}

#[pymodule]
fn dtsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRunMetrics>()?;
    m.add_function(wrap_pyfunction!(sync_penalty, m)?)?;
    m.add_function(wrap_pyfunction!(activation_penalty, m)?)?;
    m.add_function(wrap_pyfunction!(max_training_time, m)?)?;
    m.add_function(wrap_pyfunction!(expected_hardware_failures, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_cost, m)?)?;
    m.add_function(wrap_pyfunction!(h100_equivalents, m)?)?;
    m.add_function(wrap_pyfunction!(node_registrable, m)?)?;
    m.add_function(wrap_pyfunction!(node_names, m)?)?;
    m.add_function(wrap_pyfunction!(regimes, m)?)?;
    m.add_function(wrap_pyfunction!(table, m)?)?;
    Ok(())
}
