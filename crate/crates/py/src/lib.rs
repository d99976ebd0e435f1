//! Python bindings: `import pyvbspool`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use vbspool::approx::{self, KneeMethod};
use vbspool::simulator::{self, ServiceDistribution, SimConfig};
use vbspool::{exact, recursive, scenarios, ClassSpec, Discipline, Error, PoolConfig};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidClass { .. } | Error::InvalidPool(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn discipline(name: &str) -> PyResult<Discipline> {
    match name {
        "per_session" => Ok(Discipline::PerSession),
        "shared" => Ok(Discipline::SharedCapacity),
        other => Err(PyValueError::new_err(format!(
            "discipline must be 'per_session' or 'shared', got '{other}'"
        ))),
    }
}

/// One class of identical VBSs. Give `load`, or `arrival_rate` with
/// `service_rate`.
#[pyclass(name = "ClassSpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyClassSpec {
    inner: ClassSpec,
}

#[pymethods]
impl PyClassSpec {
    #[new]
    #[pyo3(signature = (count, radio_servers, *, load=None, arrival_rate=None, service_rate=1.0, discipline="per_session"))]
    fn new(
        count: usize,
        radio_servers: usize,
        load: Option<f64>,
        arrival_rate: Option<f64>,
        service_rate: f64,
        discipline: &str,
    ) -> PyResult<Self> {
        let lambda = match (load, arrival_rate) {
            (Some(a), None) => a * service_rate,
            (None, Some(l)) => l,
            _ => return Err(PyValueError::new_err("give exactly one of load and arrival_rate")),
        };
        let disc = self::discipline(discipline)?;
        Ok(Self {
            inner: ClassSpec::new(count, radio_servers, lambda, service_rate, disc),
        })
    }

    #[getter]
    fn count(&self) -> usize {
        self.inner.count
    }

    #[getter]
    fn radio_servers(&self) -> usize {
        self.inner.radio_servers
    }

    #[getter]
    fn load(&self) -> f64 {
        self.inner.load()
    }

    /// Isolated single-VBS weights `w[n]`, scaled to sum to one.
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().scaled().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "ClassSpec(count={}, radio_servers={}, arrival_rate={}, service_rate={}, discipline={:?})",
            self.inner.count, self.inner.radio_servers, self.inner.arrival_rate, self.inner.service_rate, self.inner.discipline
        )
    }
}

#[pyclass(name = "PoolConfig", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPoolConfig {
    inner: PoolConfig,
}

#[pymethods]
impl PyPoolConfig {
    #[new]
    fn new(classes: Vec<PyClassSpec>, compute_servers: usize) -> PyResult<Self> {
        let classes = classes.into_iter().map(|c| c.inner).collect();
        Ok(Self {
            inner: PoolConfig::new(classes, compute_servers).map_err(to_py)?,
        })
    }

    #[getter]
    fn compute_servers(&self) -> usize {
        self.inner.compute_servers()
    }

    #[getter]
    fn pool_size(&self) -> usize {
        self.inner.pool_size()
    }

    #[getter]
    fn radio_capacity(&self) -> usize {
        self.inner.radio_capacity()
    }

    /// Saturates at 2**128 - 1.
    fn state_space_size(&self) -> u128 {
        self.inner.state_space_size()
    }

    fn with_compute_servers(&self, compute_servers: usize) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_compute_servers(compute_servers).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "PoolConfig(classes={}, pool_size={}, compute_servers={})",
            self.inner.num_classes(),
            self.inner.pool_size(),
            self.inner.compute_servers()
        )
    }
}

#[pyclass(name = "BlockingReport", frozen, get_all)]
struct PyBlockingReport {
    per_class_radio: Vec<f64>,
    computational: f64,
    per_class_overall: Vec<f64>,
    method: String,
}

#[pymethods]
impl PyBlockingReport {
    fn __repr__(&self) -> String {
        format!(
            "BlockingReport(method={}, radio={:?}, computational={:e}, overall={:?})",
            self.method, self.per_class_radio, self.computational, self.per_class_overall
        )
    }
}

impl From<vbspool::BlockingReport> for PyBlockingReport {
    fn from(r: vbspool::BlockingReport) -> Self {
        Self {
            method: r.method.to_string(),
            per_class_radio: r.per_class_radio,
            computational: r.computational,
            per_class_overall: r.per_class_overall,
        }
    }
}

#[pyclass(name = "GainReport", frozen, get_all)]
struct PyGainReport {
    utilization_limit: f64,
    residual_gain: f64,
    knee_alpha: f64,
    knee_servers: usize,
    knee_normalized: f64,
    knee_gain: f64,
    knee_gain_bracket: (f64, f64),
    achieved_gain_fraction: f64,
    regime: String,
    scaling_exponent: f64,
    delta: f64,
}

#[pyclass(name = "SimResult", frozen, get_all)]
struct PySimResult {
    offered: Vec<u64>,
    blocked_radio: Vec<u64>,
    blocked_compute: Vec<u64>,
    blocking: Py<PyAny>,
    mean_utilization: f64,
    utilization_half_width: f64,
    occupancy_histogram: Vec<f64>,
    seed: u64,
    generator: String,
}

#[pyfunction]
fn blocking_exact(config: &PyPoolConfig) -> PyResult<PyBlockingReport> {
    Ok(exact::blocking_exact(&config.inner).map_err(to_py)?.into())
}

#[pyfunction]
fn blocking_recursive(config: &PyPoolConfig) -> PyBlockingReport {
    recursive::blocking_recursive(&config.inner).into()
}

#[pyfunction]
fn blocking_approx(config: &PyPoolConfig) -> PyResult<PyBlockingReport> {
    Ok(approx::blocking_approx_for(&config.inner).map_err(to_py)?.into())
}

#[pyfunction]
fn erlang_b(a: f64, k: usize) -> f64 {
    scenarios::erlang_b(a, k)
}

#[pyfunction]
fn knee_alpha(pool_size: usize, sigma_sq: f64, delta: f64) -> f64 {
    approx::knee_alpha(pool_size, sigma_sq, delta)
}

#[pyfunction]
fn knee_servers_exact(config: &PyPoolConfig, delta: f64) -> PyResult<usize> {
    approx::knee_servers_exact(&config.inner, delta).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (config, delta=1e-4, method="exact-search"))]
fn gain_report(config: &PyPoolConfig, delta: f64, method: &str) -> PyResult<PyGainReport> {
    let method = match method {
        "exact-search" => KneeMethod::ExactSearch,
        "approx" => KneeMethod::Approx,
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    let g = approx::gain_report(&config.inner, delta, method).map_err(to_py)?;
    Ok(PyGainReport {
        utilization_limit: g.utilization_limit,
        residual_gain: g.residual_gain,
        knee_alpha: g.knee_alpha,
        knee_servers: g.knee_servers,
        knee_normalized: g.knee_normalized,
        knee_gain: g.knee_gain,
        knee_gain_bracket: g.knee_gain_bracket,
        achieved_gain_fraction: g.achieved_gain_fraction,
        regime: format!("{:?}", g.regime),
        scaling_exponent: g.scaling_exponent,
        delta: g.delta,
    })
}

#[pyfunction]
#[pyo3(signature = (config, horizon, seed=1, replications=1, warmup=None, service="exponential"))]
fn simulate(
    py: Python<'_>,
    config: &PyPoolConfig,
    horizon: f64,
    seed: u64,
    replications: usize,
    warmup: Option<f64>,
    service: &str,
) -> PyResult<PySimResult> {
    let mut cfg = SimConfig::new(config.inner.clone(), horizon, seed);
    cfg.replications = replications;
    if let Some(w) = warmup {
        cfg.warmup_time = w;
    }
    cfg.service = match service {
        "exponential" => ServiceDistribution::Exponential,
        "erlang2" => ServiceDistribution::Erlang2,
        "hyper-exponential" | "hyperexponential" => ServiceDistribution::HyperExponential,
        other => return Err(PyValueError::new_err(format!("unknown service distribution '{other}'"))),
    };
    let stats = py.detach(|| simulator::simulate(&cfg)).map_err(to_py)?;
    let (_, utilization_half_width) = simulator::utilization_estimate(&stats);
    let report: PyBlockingReport = stats.blocking_report().into();
    Ok(PySimResult {
        offered: stats.offered,
        blocked_radio: stats.blocked_radio,
        blocked_compute: stats.blocked_compute,
        blocking: Py::new(py, report)?.into_any(),
        mean_utilization: stats.mean_utilization,
        utilization_half_width,
        occupancy_histogram: stats.occupancy_histogram,
        seed: stats.seed,
        generator: stats.generator,
    })
}

#[pymodule]
fn pyvbspool(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyClassSpec>()?;
    m.add_class::<PyPoolConfig>()?;
    m.add_class::<PyBlockingReport>()?;
    m.add_class::<PyGainReport>()?;
    m.add_class::<PySimResult>()?;
    m.add_function(wrap_pyfunction!(blocking_exact, m)?)?;
    m.add_function(wrap_pyfunction!(blocking_recursive, m)?)?;
    m.add_function(wrap_pyfunction!(blocking_approx, m)?)?;
    m.add_function(wrap_pyfunction!(erlang_b, m)?)?;
    m.add_function(wrap_pyfunction!(knee_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(knee_servers_exact, m)?)?;
    m.add_function(wrap_pyfunction!(gain_report, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
