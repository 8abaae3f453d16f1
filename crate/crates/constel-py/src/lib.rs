//! Python bindings: instance generation, centralized and distributed solves,
//! the enumeration oracle, and communication timelines.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use constel::centralized::{solve_centralized, validate};
use constel::distributed::{run as run_decomposition, DecompositionConfig, StepSchedule};
use constel::instance::{
    generate, load as load_instance, paper_example_instance, save as save_instance,
    GeneratorConfig, Instance, VariableLayout,
};
use constel::milp::BnbLimits;
use constel::model::CouplingMode;
use constel::network::{
    check_joint_connectivity, generate_timeline, load_timeline, save_timeline, Connectivity,
    GraphTimeline,
};
use constel::oracle::enumerate;

fn to_py_err(e: constel::Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_coupling(s: &str) -> PyResult<CouplingMode> {
    match s {
        "eq" => Ok(CouplingMode::Equality),
        "le" => Ok(CouplingMode::Inequality),
        other => Err(PyValueError::new_err(format!(
            "coupling must be `eq` or `le`, got `{other}`"
        ))),
    }
}

/// A scheduling scenario.
#[pyclass(name = "Instance", skip_from_py_object)]
#[derive(Clone)]
struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    /// Generate a random instance from a seed.
    #[staticmethod]
    #[pyo3(signature = (seed, n, m, theta_max=4, omega_max=4, days=3))]
    fn generate(
        seed: u64,
        n: usize,
        m: usize,
        theta_max: usize,
        omega_max: usize,
        days: usize,
    ) -> PyResult<Self> {
        let cfg = GeneratorConfig::with_defaults(n, m, theta_max, omega_max, days);
        Ok(PyInstance {
            inner: generate(seed, &cfg).map_err(to_py_err)?,
        })
    }

    /// The worked two-satellite, three-target scenario.
    #[staticmethod]
    fn paper_example() -> Self {
        PyInstance {
            inner: paper_example_instance(),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyInstance {
            inner: load_instance(path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_instance(&self.inner, path).map_err(to_py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    /// Count of stacked acquisition variables.
    #[getter]
    fn nx(&self) -> usize {
        VariableLayout::new(&self.inner).nx()
    }

    /// Count of stacked downlink variables.
    #[getter]
    fn ny(&self) -> usize {
        VariableLayout::new(&self.inner).ny()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={}, m={})", self.inner.n, self.inner.m)
    }
}

/// A time-varying communication graph.
#[pyclass(name = "Timeline", skip_from_py_object)]
#[derive(Clone)]
struct PyTimeline {
    inner: GraphTimeline,
}

#[pymethods]
impl PyTimeline {
    /// Draw a jointly connected timeline.
    #[staticmethod]
    #[pyo3(signature = (seed, n, frames, delta=3))]
    fn generate(seed: u64, n: usize, frames: usize, delta: usize) -> PyResult<Self> {
        Ok(PyTimeline {
            inner: generate_timeline(seed, n, frames, delta).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyTimeline {
            inner: load_timeline(path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_timeline(&self.inner, path).map_err(to_py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn frames(&self) -> usize {
        self.inner.frames.len()
    }

    /// True when every delta-window union is connected.
    fn jointly_connected(&self) -> PyResult<bool> {
        let horizon = self.inner.frames.len().saturating_sub(self.inner.delta);
        Ok(matches!(
            check_joint_connectivity(&self.inner, horizon).map_err(to_py_err)?,
            Connectivity::Ok
        ))
    }

    fn neighbours(&self, agent: usize, t: usize) -> PyResult<Vec<usize>> {
        self.inner.neighbours(agent, t).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Timeline(n={}, frames={}, delta={})",
            self.inner.n,
            self.inner.frames.len(),
            self.inner.delta
        )
    }
}

fn schedule_to_dict<'py>(
    py: Python<'py>,
    sched: &constel::centralized::Schedule,
) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    let acqs = PyList::empty(py);
    for a in &sched.acquisitions {
        let d = PyDict::new(py);
        d.set_item("satellite", a.satellite)?;
        d.set_item("target", a.target)?;
        d.set_item("occurrence", a.occurrence)?;
        d.set_item("time", a.time)?;
        acqs.append(d)?;
    }
    let dls = PyList::empty(py);
    for dl in &sched.downlinks {
        let d = PyDict::new(py);
        d.set_item("satellite", dl.satellite)?;
        d.set_item("target", dl.target)?;
        d.set_item("occurrence", dl.occurrence)?;
        d.set_item("time", dl.time)?;
        d.set_item("duration", dl.duration)?;
        dls.append(d)?;
    }
    out.set_item("acquisitions", acqs)?;
    out.set_item("downlinks", dls)?;
    out.set_item("objective", sched.objective)?;
    out.set_item("status", sched.solve_meta.status.to_string())?;
    out.set_item("gap", sched.solve_meta.gap)?;
    out.set_item("nodes", sched.solve_meta.nodes)?;
    Ok(out)
}

/// Solve the centralized problem; returns the schedule as a dict.
#[pyfunction]
#[pyo3(signature = (instance, coupling="eq", time_max_s=None, gap_target=None))]
fn solve_central<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    coupling: &str,
    time_max_s: Option<f64>,
    gap_target: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = parse_coupling(coupling)?;
    let mut limits = BnbLimits::default();
    if let Some(s) = time_max_s {
        limits.time_max = Some(std::time::Duration::from_secs_f64(s));
    }
    if let Some(g) = gap_target {
        limits.gap_target = g;
    }
    let (sched, _) = solve_centralized(&instance.inner, mode, &limits).map_err(to_py_err)?;
    let violations = validate(&instance.inner, &sched).map_err(to_py_err)?;
    let out = schedule_to_dict(py, &sched)?;
    out.set_item("violations", violations.len())?;
    Ok(out)
}

/// Run the distributed decomposition; returns a summary dict.
#[pyfunction]
#[pyo3(signature = (instance, timeline, tf=500, t0=10.0, penalty=None, tol_alloc=1e-6))]
fn solve_distributed<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    timeline: &PyTimeline,
    tf: usize,
    t0: f64,
    penalty: Option<f64>,
    tol_alloc: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = DecompositionConfig::for_instance(&instance.inner);
    cfg.tf = tf;
    cfg.steps = StepSchedule { t0 };
    if let Some(m) = penalty {
        cfg.penalty = m;
    }
    cfg.tol_alloc = tol_alloc;
    cfg.trace_stride = tf.max(1);
    let trace = run_decomposition(&instance.inner, &timeline.inner, &cfg).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("iterations", trace.iterations_run)?;
    out.set_item("converged_at", trace.converged_at)?;
    out.set_item("recovered_cost", trace.recovered_cost)?;
    out.set_item("rho_star_sum", trace.rho_star_sum())?;
    out.set_item("coupling_violation_max", trace.max_coupling_violation())?;
    out.set_item("conservation_residual", trace.max_sum_residual())?;
    out.set_item("schedule", schedule_to_dict(py, &trace.schedule)?)?;
    Ok(out)
}

/// Exhaustively enumerate a tiny instance; returns (objective, feasible, total).
#[pyfunction]
#[pyo3(signature = (instance, coupling="eq", cap=24))]
fn oracle_enumerate(
    instance: &PyInstance,
    coupling: &str,
    cap: usize,
) -> PyResult<(Option<f64>, u64, u64)> {
    let mode = parse_coupling(coupling)?;
    let res = enumerate(&instance.inner, mode, cap).map_err(to_py_err)?;
    let objective = if res.is_infeasible() {
        None
    } else {
        Some(res.objective)
    };
    Ok((objective, res.feasible_count, res.total_count))
}

#[pymodule]
fn constel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyTimeline>()?;
    m.add_function(wrap_pyfunction!(solve_central, m)?)?;
    m.add_function(wrap_pyfunction!(solve_distributed, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_enumerate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
