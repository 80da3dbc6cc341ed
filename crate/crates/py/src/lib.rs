//! Python bindings: plans, validation, execution, edits, metrics,
//! corruption, and the evaluation sweep.
//!
//! Structured results cross the boundary as plain Python objects (dicts and
//! lists) decoded from the same JSON the CLI emits.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

use planweave_core::eval::{self, CorruptionKind, EvalConfig, EvalContext, FeedbackMode};
use planweave_core::metrics::{self, CostModel};
use planweave_core::plan::plan_to_json;
use planweave_core::{apply_edit, parse_plan, serialize_plan, EditOp, Executor, NodeId, PlanGraph};

create_exception!(planweave, PlanweaveError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    PlanweaveError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (value.to_string(),))
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "Registry", module = "planweave", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRegistry(Arc<planweave_core::Registry>);

#[pymethods]
impl PyRegistry {
    /// The builtin agent catalog.
    #[staticmethod]
    fn builtin() -> Self {
        PyRegistry(Arc::new(planweave_core::Registry::builtin()))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        planweave_core::Registry::load(&path).map(|r| PyRegistry(Arc::new(r))).map_err(err)
    }

    fn names(&self) -> Vec<String> {
        self.0.names().map(str::to_string).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

fn registry_or_builtin(registry: Option<&PyRegistry>) -> Arc<planweave_core::Registry> {
    registry.map_or_else(|| Arc::new(planweave_core::Registry::builtin()), |r| r.0.clone())
}

#[pyclass(name = "Plan", module = "planweave", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyPlan(PlanGraph);

#[pymethods]
impl PyPlan {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_plan(text).map(PyPlan).map_err(err)
    }

    #[staticmethod]
    fn from_dict(obj: &Bound<'_, PyAny>) -> PyResult<Self> {
        planweave_core::plan::plan_from_json(&from_py(obj)?).map(PyPlan).map_err(err)
    }

    fn to_json(&self) -> String {
        serialize_plan(&self.0)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &plan_to_json(&self.0))
    }

    #[getter]
    fn query(&self) -> &str {
        self.0.query()
    }

    #[getter]
    fn node_ids(&self) -> Vec<u32> {
        self.0.node_ids().into_iter().map(|id| id.0).collect()
    }

    /// Node statuses keyed by id.
    fn statuses(&self) -> Vec<(u32, &'static str)> {
        self.0.nodes().iter().map(|n| (n.id.0, n.status.as_str())).collect()
    }

    fn topo_order(&self) -> PyResult<Vec<u32>> {
        self.0.topo_order().map(|o| o.into_iter().map(|id| id.0).collect()).map_err(err)
    }

    fn structurally_eq(&self, other: &PyPlan) -> bool {
        self.0.structurally_eq(&other.0)
    }

    fn __len__(&self) -> usize {
        self.0.nodes().len()
    }

    fn __repr__(&self) -> String {
        format!("Plan(nodes={}, edges={})", self.0.nodes().len(), self.0.edges().len())
    }
}

#[pyfunction]
fn parse(text: &str) -> PyResult<PyPlan> {
    PyPlan::from_json(text)
}

/// Returns `{"errors": [...], "warnings": [...]}`.
#[pyfunction]
#[pyo3(signature = (plan, registry=None))]
fn validate<'py>(py: Python<'py>, plan: &PyPlan, registry: Option<&PyRegistry>) -> PyResult<Bound<'py, PyAny>> {
    let report = planweave_core::validate(&plan.0, &registry_or_builtin(registry));
    to_py(py, &serde_json::to_value(report).map_err(err)?)
}

/// Runs every node (or just `node`) with builtin and http-disabled agents.
/// Returns the executed plan and the JSON-lines trace.
#[pyfunction]
#[pyo3(signature = (plan, registry=None, node=None))]
fn execute(py: Python<'_>, plan: &PyPlan, registry: Option<&PyRegistry>, node: Option<u32>) -> PyResult<(PyPlan, String)> {
    let executor = Executor::new(registry_or_builtin(registry))
        .with_clock(Arc::new(planweave_core::executor::LogicalClock::default()));
    let graph = plan.0.clone();
    py.detach(move || match node {
        None => executor.execute_all(&graph).map(|(p, t)| (PyPlan(p), t.to_json_lines())),
        Some(id) => executor
            .execute_node(&graph, NodeId(id))
            .map(|(p, r)| (PyPlan(p), serde_json::to_string(&r).expect("record serializes") + "\n")),
    })
    .map_err(err)
}

/// Resumes stale and failed-upstream nodes only.
#[pyfunction]
#[pyo3(signature = (plan, registry=None))]
fn resume(plan: &PyPlan, registry: Option<&PyRegistry>) -> PyResult<(PyPlan, String)> {
    Executor::new(registry_or_builtin(registry))
        .with_clock(Arc::new(planweave_core::executor::LogicalClock::default()))
        .resume_stale(&plan.0)
        .map(|(p, t)| (PyPlan(p), t.to_json_lines()))
        .map_err(err)
}

/// Applies one edit given as a dict such as
/// `{"kind": "set_task", "node": 2, "task": "..."}`.
#[pyfunction]
fn edit(plan: &PyPlan, op: &Bound<'_, PyAny>) -> PyResult<PyPlan> {
    let op: EditOp = serde_json::from_value(from_py(op)?).map_err(|e| PyValueError::new_err(e.to_string()))?;
    apply_edit(&plan.0, &op).map(PyPlan).map_err(err)
}

/// Edits turning `base` into `target`, as a list of dicts.
#[pyfunction]
fn diff<'py>(py: Python<'py>, base: &PyPlan, target: &PyPlan) -> PyResult<Bound<'py, PyAny>> {
    let script = planweave_core::diff(&base.0, &target.0);
    to_py(py, &serde_json::to_value(&script.ops).map_err(err)?)
}

/// Unit-cost graph edit distance and whether it is exact.
#[pyfunction]
fn ged(a: &PyPlan, b: &PyPlan) -> (u32, bool) {
    let g = metrics::ged(&a.0, &b.0, &CostModel::default());
    (g.value, g.exact)
}

#[pyfunction]
fn is_isomorphic(a: &PyPlan, b: &PyPlan) -> bool {
    metrics::is_isomorphic(&a.0, &b.0)
}

/// Applies one seeded corruption; returns the flawed plan and its record.
#[pyfunction]
#[pyo3(signature = (plan, kind, seed, registry=None))]
fn corrupt<'py>(
    py: Python<'py>,
    plan: &PyPlan,
    kind: &str,
    seed: u64,
    registry: Option<&PyRegistry>,
) -> PyResult<(PyPlan, Bound<'py, PyAny>)> {
    let kind: CorruptionKind = kind.parse().map_err(PyValueError::new_err)?;
    let (corrupted, record) = eval::corrupt(&plan.0, kind, seed, &registry_or_builtin(registry)).map_err(err)?;
    Ok((PyPlan(corrupted), to_py(py, &serde_json::to_value(record).map_err(err)?)?))
}

/// Runs the benchmark sweep without a language model: detailed and vague
/// feedback fall back to the unrefined plan, dm_fix applies its edits.
/// Returns the nested report as a dict.
#[pyfunction]
#[pyo3(signature = (corpus, registry, modes=None, kinds=None, seed=eval::DEFAULT_SEED, jobs=1))]
fn run_eval<'py>(
    py: Python<'py>,
    corpus: PathBuf,
    registry: PathBuf,
    modes: Option<Vec<String>>,
    kinds: Option<Vec<String>>,
    seed: u64,
    jobs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let modes = match modes {
        Some(m) => m.iter().map(|s| s.parse::<FeedbackMode>()).collect::<Result<_, _>>().map_err(PyValueError::new_err)?,
        None => FeedbackMode::ALL.to_vec(),
    };
    let kinds = match kinds {
        Some(k) => k.iter().map(|s| s.parse::<CorruptionKind>()).collect::<Result<_, _>>().map_err(PyValueError::new_err)?,
        None => CorruptionKind::ALL.to_vec(),
    };
    let report = py.detach(move || -> Result<String, String> {
        let registry = planweave_core::Registry::load(&registry).map_err(|e| e.to_string())?;
        let executor = Executor::new(Arc::new(registry.clone()));
        let cases = eval::load_verified(&corpus, &executor).map_err(|e| e.to_string())?;
        let ctx = EvalContext { registry: &registry, executor: &executor, planner: None };
        let config = EvalConfig { master_seed: seed, modes, kinds, jobs, ..EvalConfig::default() };
        Ok(eval::run_sweep(&ctx, &cases, &config).report().to_json())
    });
    let report: serde_json::Value = serde_json::from_str(&report.map_err(err)?).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn planweave(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PlanweaveError", m.py().get_type::<PlanweaveError>())?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PyRegistry>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(execute, m)?)?;
    m.add_function(wrap_pyfunction!(resume, m)?)?;
    m.add_function(wrap_pyfunction!(edit, m)?)?;
    m.add_function(wrap_pyfunction!(diff, m)?)?;
    m.add_function(wrap_pyfunction!(ged, m)?)?;
    m.add_function(wrap_pyfunction!(is_isomorphic, m)?)?;
    m.add_function(wrap_pyfunction!(corrupt, m)?)?;
    m.add_function(wrap_pyfunction!(run_eval, m)?)?;
    Ok(())
}
