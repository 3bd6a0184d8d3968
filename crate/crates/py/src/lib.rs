//! Python bindings: datasets, densities, the three samplers and the metrics.
//!
//! Point sets cross the boundary as lists of rows (`list[list[float]]`).

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::pflow::flow::{run_batch, CloudPolicy, Estimator, FlowConfig, MeasureSource};
use ::pflow::measures::{Dataset as CoreDataset, DensitySpec, Objective, DENSITY_NAMES, OBJECTIVE_NAMES};
use ::pflow::metrics;
use ::pflow::optimize::{anneal_minimize, AnnealConfig};
use ::pflow::schedule::Schedule;
use ::pflow::validation::{run_suite, Suite};
use ::pflow::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::InvalidArgument(_) | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn rows_to_dataset(rows: &[Vec<f64>]) -> PyResult<CoreDataset> {
    let dim = rows.first().map(|r| r.len()).ok_or_else(|| PyValueError::new_err("empty point set"))?;
    CoreDataset::from_points(dim, rows).map_err(to_py)
}

fn dataset_rows(d: &CoreDataset) -> Vec<Vec<f64>> {
    d.iter().map(|p| p.to_vec()).collect()
}

fn parse_schedule(s: &str) -> PyResult<Schedule> {
    s.parse().map_err(to_py)
}

/// A finite point set in R^d.
#[pyclass(frozen)]
struct Dataset {
    inner: Arc<CoreDataset>,
}

#[pymethods]
impl Dataset {
    #[new]
    fn new(points: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(rows_to_dataset(&points)?) })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(::pflow::measures::load_dataset(path).map_err(to_py)?) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Largest Euclidean norm of a point.
    fn radius(&self) -> f64 {
        self.inner.radius_l2()
    }

    fn points(&self) -> Vec<Vec<f64>> {
        dataset_rows(&self.inner)
    }

    /// Smallest L1 distance from `x` to the points.
    fn min_l1(&self, x: Vec<f64>) -> PyResult<f64> {
        metrics::min_l1_distance(&x, &self.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, dim={})", self.inner.len(), self.inner.dim())
    }
}

/// A registered density, known up to normalization, on a bounded support.
#[pyclass(frozen)]
struct Density {
    inner: Arc<DensitySpec>,
    name: String,
}

#[pymethods]
impl Density {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        let inner = DensitySpec::from_name(name).map_err(to_py)?;
        Ok(Self { inner: Arc::new(inner), name: name.to_string() })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Bounding box of the support as `(lower, upper)`.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.inner.lower().to_vec(), self.inner.upper().to_vec())
    }

    /// Unnormalized density value.
    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!("expected {} coordinates", self.inner.dim())));
        }
        Ok(self.inner.eval(&x))
    }

    /// Independent reference draws (rejection or inverse-CDF sampling).
    #[pyo3(signature = (count, seed=0))]
    fn reference_samples(&self, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let mut rng = ::pflow::measures::RngStream::new(seed, u64::MAX - 1);
        let cloud = ::pflow::measures::reference_sampler(&self.inner, &mut rng, count).map_err(to_py)?;
        Ok(dataset_rows(&cloud))
    }

    fn __repr__(&self) -> String {
        format!("Density({:?}, dim={})", self.name, self.inner.dim())
    }
}

/// Pushes standard normal starts through the flow of a point set.
#[pyfunction]
#[pyo3(signature = (data, samples, steps=50, seed=0, normalize=true, schedule="linear"))]
fn generate(
    py: Python<'_>,
    data: &Dataset,
    samples: usize,
    steps: usize,
    seed: u64,
    normalize: bool,
    schedule: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let cfg = FlowConfig { normalize_init: normalize, schedule: parse_schedule(schedule)?, ..FlowConfig::generation(steps) };
    let source = MeasureSource::Empirical(data.inner.clone());
    let out = py.allow_threads(|| run_batch(&source, &cfg, samples, seed)).map_err(to_py)?;
    Ok(dataset_rows(&out.samples))
}

/// Samples a registered density through its Monte-Carlo drift.
#[pyfunction]
#[pyo3(signature = (density, samples, steps=50, mc_points=20_000, scale=1.0, seed=0, estimator="ball", shared_cloud=false))]
#[allow(clippy::too_many_arguments)]
fn sample(
    py: Python<'_>,
    density: &Density,
    samples: usize,
    steps: usize,
    mc_points: usize,
    scale: f64,
    seed: u64,
    estimator: &str,
    shared_cloud: bool,
) -> PyResult<Vec<Vec<f64>>> {
    let estimator = match estimator {
        "ball" => Estimator::Ball,
        "normal" => Estimator::Normal,
        other => return Err(PyValueError::new_err(format!("unknown estimator `{other}`; use ball or normal"))),
    };
    let cloud_policy = if shared_cloud { CloudPolicy::SharedPerStep } else { CloudPolicy::FreshPerTrajectory };
    let cfg = FlowConfig { estimator, cloud_policy, ..FlowConfig::density(steps, mc_points, scale) };
    let source = MeasureSource::Density(density.inner.clone());
    let out = py.allow_threads(|| run_batch(&source, &cfg, samples, seed)).map_err(to_py)?;
    Ok(dataset_rows(&out.samples))
}

/// Annealed minimization of a registered objective name or a Python callable.
///
/// Returns a dict with `x_star`, `u_star` and the per-round history.
#[pyfunction]
#[pyo3(signature = (objective, dim=2, rounds=5, points=10, mc_points=50_000, seed=0))]
fn minimize(
    py: Python<'_>,
    objective: &Bound<'_, PyAny>,
    dim: usize,
    rounds: usize,
    points: usize,
    mc_points: usize,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let cfg = AnnealConfig { rounds, points_per_round: points, mc_points, ..AnnealConfig::default() };
    let mut rng = ::pflow::measures::RngStream::new(seed, 0);
    let result = if let Ok(name) = objective.extract::<String>() {
        let obj: Objective = name.parse().map_err(to_py)?;
        py.allow_threads(|| anneal_minimize(|x: &[f64]| obj.eval(x), dim, &cfg, &mut rng))
    } else if objective.is_callable() {
        let f: Py<PyAny> = objective.clone().unbind();
        // Exceptions and non-numeric returns become NaN, which the optimizer rejects.
        let eval = move |x: &[f64]| -> f64 {
            Python::with_gil(|py| f.call1(py, (x.to_vec(),)).and_then(|v| v.extract::<f64>(py)).unwrap_or(f64::NAN))
        };
        py.allow_threads(|| anneal_minimize(eval, dim, &cfg, &mut rng))
    } else {
        return Err(PyValueError::new_err("objective must be a registry name or a callable"));
    }
    .map_err(to_py)?;

    let out = PyDict::new_bound(py);
    out.set_item("x_star", result.x_star)?;
    out.set_item("u_star", result.u_star)?;
    let history = pyo3::types::PyList::empty_bound(py);
    for r in &result.history.rounds {
        let row = PyDict::new_bound(py);
        row.set_item("round", r.round)?;
        row.set_item("beta", r.beta)?;
        row.set_item("alpha", r.alpha)?;
        row.set_item("round_best", r.round_best)?;
        row.set_item("x_star", r.x_star.clone())?;
        row.set_item("u_star", r.u_star)?;
        history.append(row)?;
    }
    out.set_item("rounds", history)?;
    Ok(out.unbind())
}

/// Probability that a standard normal in R^d has norm above `m`.
#[pyfunction]
fn tail_prob(m: f64, d: usize) -> f64 {
    metrics::tail_prob(m, d)
}

/// Rows `(d, [P(|xi| > M) for M = 1..6])`.
#[pyfunction]
fn tail_table() -> Vec<(usize, Vec<f64>)> {
    metrics::tail_table()
}

/// W1 distance between two 1-D samples of equal size.
#[pyfunction]
fn wasserstein1(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let mut a = a;
    let mut b = b;
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    metrics::wasserstein1_sorted(&a, &b).map_err(to_py)
}

/// Sliced W2 distance between two point clouds of equal size.
#[pyfunction]
#[pyo3(signature = (a, b, projections=64, seed=0))]
fn sliced_w2(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, projections: usize, seed: u64) -> PyResult<f64> {
    metrics::sliced_w2(&rows_to_dataset(&a)?, &rows_to_dataset(&b)?, projections, seed).map_err(to_py)
}

/// Runs a validation suite (`fast` or `full`); returns one dict per check.
#[pyfunction]
#[pyo3(signature = (suite="fast", seed=0))]
fn validate(py: Python<'_>, suite: &str, seed: u64) -> PyResult<Vec<Py<PyDict>>> {
    let suite: Suite = suite.parse().map_err(to_py)?;
    let checks = py.allow_threads(|| run_suite(suite, seed));
    checks
        .into_iter()
        .map(|c| {
            let d = PyDict::new_bound(py);
            d.set_item("name", c.name)?;
            d.set_item("passed", c.passed)?;
            d.set_item("value", c.value)?;
            d.set_item("threshold", c.threshold)?;
            d.set_item("detail", c.detail)?;
            Ok(d.unbind())
        })
        .collect()
}

#[pymodule]
fn pflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Density>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(tail_prob, m)?)?;
    m.add_function(wrap_pyfunction!(tail_table, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein1, m)?)?;
    m.add_function(wrap_pyfunction!(sliced_w2, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add("DENSITY_NAMES", DENSITY_NAMES.to_vec())?;
    m.add("OBJECTIVE_NAMES", OBJECTIVE_NAMES.to_vec())?;
    Ok(())
}
