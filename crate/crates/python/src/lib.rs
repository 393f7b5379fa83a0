//! Python bindings for `adascal`.
//!
//! Small value types are wrapped as classes; scenario results, histories
//! and audit reports cross the boundary as JSON and come back as dicts.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use adascal::{audit, bandit, harness, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "PolyhedralCone", module = "pyadascal", frozen)]
struct PyCone(adascal::PolyhedralCone);

#[pymethods]
impl PyCone {
    #[new]
    #[pyo3(signature = (dim, generators=Vec::new(), halfspaces=None))]
    fn new(
        dim: usize,
        generators: Vec<Vec<f64>>,
        halfspaces: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        adascal::PolyhedralCone::new(dim, generators, halfspaces)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn orthant(dim: usize) -> PyResult<Self> {
        adascal::PolyhedralCone::orthant(dim)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn contains(&self, v: Vec<f64>) -> PyResult<bool> {
        self.0.contains(&v).map_err(to_py)
    }

    fn dual_contains(&self, psi: Vec<f64>) -> PyResult<bool> {
        self.0.dual_contains(&psi).map_err(to_py)
    }

    fn order_leq(&self, a: Vec<f64>, b: Vec<f64>) -> PyResult<bool> {
        self.0.order_leq(&a, &b).map_err(to_py)
    }

    fn order_strict(&self, a: Vec<f64>, b: Vec<f64>) -> PyResult<bool> {
        self.0.order_strict(&a, &b).map_err(to_py)
    }
}

#[pyclass(name = "WeightVector", module = "pyadascal", frozen, from_py_object)]
#[derive(Clone)]
struct PyWeight(adascal::WeightVector);

#[pymethods]
impl PyWeight {
    /// Normalizes `coords` to unit length.
    #[new]
    fn new(coords: Vec<f64>) -> PyResult<Self> {
        adascal::WeightVector::normalize(&coords)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn coords(&self) -> Vec<f64> {
        self.0.coords().to_vec()
    }

    fn scalarize(&self, u: Vec<f64>) -> PyResult<f64> {
        self.0.scalarize(&u).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("WeightVector({:?})", self.0.coords())
    }
}

#[pyclass(name = "VectorGame", module = "pyadascal", frozen)]
struct PyGame(adascal::VectorGame);

#[pymethods]
impl PyGame {
    /// Two-player game where both players receive `table[a][b]`.
    #[staticmethod]
    #[pyo3(signature = (table, bound, labels=None))]
    fn shared(
        table: Vec<Vec<Vec<f64>>>,
        bound: f64,
        labels: Option<[Vec<String>; 2]>,
    ) -> PyResult<Self> {
        let numbered = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
        let cols = table.first().map_or(0, Vec::len);
        let labels = labels.unwrap_or_else(|| [numbered(table.len()), numbered(cols)]);
        adascal::VectorGame::shared_bimatrix(table, bound, labels)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn bos4d() -> Self {
        Self(adascal::VectorGame::bos4d())
    }

    #[getter]
    fn action_counts(&self) -> Vec<usize> {
        self.0.action_counts().to_vec()
    }

    fn payoff(&self, profile: Vec<usize>, player: usize) -> PyResult<Vec<f64>> {
        self.0
            .payoff(&profile, player)
            .map(<[f64]>::to_vec)
            .map_err(to_py)
    }

    fn profile_label(&self, profile: Vec<usize>) -> String {
        self.0.profile_label(&profile)
    }

    /// Pure equilibria of the game scalarized by one weight per player.
    fn pure_nash(&self, weights: Vec<PyWeight>) -> PyResult<Vec<Vec<usize>>> {
        let w: Vec<_> = weights.into_iter().map(|w| w.0).collect();
        self.0
            .scalarize(&w)
            .and_then(|g| g.pure_nash())
            .map_err(to_py)
    }

    fn is_weak_nash(&self, cones: Vec<PyRef<'_, PyCone>>, profile: Vec<usize>) -> PyResult<bool> {
        let cones: Vec<_> = cones.iter().map(|c| c.0.clone()).collect();
        self.0.is_weak_nash(&cones, &profile).map_err(to_py)
    }
}

fn simplex(p: Vec<f64>) -> PyResult<adascal::SimplexPoint> {
    adascal::SimplexPoint::new(p).map_err(to_py)
}

#[pyfunction]
fn ix_estimate(dist: Vec<f64>, chosen: usize, reward: f64, gamma: f64) -> PyResult<Vec<f64>> {
    bandit::ix_estimate(&simplex(dist)?, chosen, reward, gamma).map_err(to_py)
}

#[pyfunction]
fn omd_entropy_step(dist: Vec<f64>, loss: Vec<f64>, eta: f64) -> PyResult<Vec<f64>> {
    bandit::omd_entropy_step(&simplex(dist)?, &loss, eta)
        .map(adascal::SimplexPoint::into_inner)
        .map_err(to_py)
}

#[pyfunction]
fn expix_step(
    dist: Vec<f64>,
    chosen: usize,
    reward: f64,
    eta: f64,
    gamma: f64,
) -> PyResult<Vec<f64>> {
    adascal::LearnerState::new(simplex(dist)?, eta, gamma)
        .and_then(|s| s.expix_step(chosen, reward))
        .map(|s| s.dist.into_inner())
        .map_err(to_py)
}

fn parse_config(
    config: &str,
    overrides: Option<Vec<String>>,
) -> PyResult<harness::ExperimentConfig> {
    harness::ExperimentConfig::from_toml_str(config, &overrides.unwrap_or_default()).map_err(to_py)
}

/// Runs a scenario from TOML text. Returns a dict with `histogram`,
/// `records` and `audit`.
#[pyfunction]
#[pyo3(signature = (config, overrides=None))]
fn run_scenario<'py>(
    py: Python<'py>,
    config: &str,
    overrides: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(config, overrides)?;
    let out = py.detach(|| harness::run_scenario(&cfg)).map_err(to_py)?;
    let value = serde_json::json!({
        "histogram": out.histogram,
        "records": out.records,
        "audit": out.audit,
    });
    json_to_py(py, &value)
}

/// Simulates a single run and returns its full history as a dict.
#[pyfunction]
#[pyo3(signature = (config, run_id=0, overrides=None))]
fn simulate_run<'py>(
    py: Python<'py>,
    config: &str,
    run_id: usize,
    overrides: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(config, overrides)?;
    let resolved = cfg.resolve().map_err(to_py)?;
    let history = harness::scenario::simulate_run(&cfg, &resolved, run_id).map_err(to_py)?;
    json_to_py(py, &history)
}

/// Audits a history given as a JSON string and returns the report dict.
#[pyfunction]
fn audit_history<'py>(py: Python<'py>, history_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let history: adascal::RunHistory =
        serde_json::from_str(history_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = audit::audit(&history).map_err(to_py)?;
    json_to_py(py, &report)
}

#[pymodule]
fn pyadascal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCone>()?;
    m.add_class::<PyWeight>()?;
    m.add_class::<PyGame>()?;
    m.add_function(wrap_pyfunction!(ix_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(omd_entropy_step, m)?)?;
    m.add_function(wrap_pyfunction!(expix_step, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_run, m)?)?;
    m.add_function(wrap_pyfunction!(audit_history, m)?)?;
    Ok(())
}
