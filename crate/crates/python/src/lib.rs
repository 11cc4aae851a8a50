//! Python bindings for `bosample`.
//!
//! Matrices cross the boundary as lists of rows, vectors as lists of floats.

use bosample::acquisition::{
    self, estimate_objective_records, fit_objective_surrogate, records_dataset, score_population,
    DEFAULT_ILCB_LAMBDA, DEFAULT_OBJECTIVE_ROUNDS,
};
use bosample::design::{self, minmax_design, srs_design, SampleDraw, SamplingDesign, DEFAULT_EPSILON};
use bosample::estimators::{self, PopulationFrame};
use bosample::harness::{self, SimulationConfig, SyntheticSpec};
use bosample::metrics::{self, Metric, DEFAULT_HISTOGRAM_BINS, DEFAULT_KL_SMOOTHING};
use bosample::stats::{self, Alternative, MwuMethod};
use bosample::{
    AcquisitionKind, Dataset, Error, FeatureMatrix, GpPosterior, KernelSettings, Prediction, SamplingScheme,
    SrsPiConvention,
};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for bosample::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<FeatureMatrix> {
    FeatureMatrix::from_rows(rows).py()
}

fn scheme(name: &str, n: Option<usize>, pi: Vec<f64>) -> PyResult<SamplingDesign> {
    SamplingDesign::from_pi(pi, SamplingScheme::parse(name).py()?, n).py()
}

/// Squared-exponential GP posterior with z-scored inputs.
#[pyclass(module = "bosample_py", frozen)]
struct GaussianProcess {
    inner: GpPosterior,
}

#[pymethods]
impl GaussianProcess {
    /// Unset hyperparameters take data-driven defaults.
    #[new]
    #[pyo3(signature = (x, y, length_scale=None, noise_variance=None, jitter=0.0))]
    fn new(x: Vec<Vec<f64>>, y: Vec<f64>, length_scale: Option<f64>, noise_variance: Option<f64>, jitter: f64) -> PyResult<Self> {
        let data = Dataset::new(matrix(&x)?, y).py()?;
        let cfg = KernelSettings { length_scale, noise_variance, jitter }.resolve(&data).py()?;
        Ok(Self { inner: GpPosterior::fit(&data, &cfg).py()? })
    }

    /// Returns `(means, std_devs)`.
    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let preds = self.inner.predict_many(&matrix(&x)?).py()?;
        Ok(preds.iter().map(|p| (p.mean, p.std_dev)).unzip())
    }

    #[getter]
    fn length_scale(&self) -> f64 {
        self.inner.kernel().length_scale
    }

    #[getter]
    fn noise_variance(&self) -> f64 {
        self.inner.kernel().noise_variance
    }

    #[getter]
    fn applied_jitter(&self) -> f64 {
        self.inner.applied_jitter()
    }
}

#[pyfunction]
fn expected_improvement(mean: f64, std_dev: f64, g_min: f64) -> f64 {
    acquisition::acq_ei(&Prediction { mean, std_dev }, g_min)
}

#[pyfunction]
fn improvement_variance(mean: f64, std_dev: f64, g_min: f64) -> PyResult<f64> {
    acquisition::improvement_variance(&Prediction { mean, std_dev }, g_min).py()
}

#[pyfunction]
fn scaled_expected_improvement(mean: f64, std_dev: f64, g_min: f64) -> f64 {
    acquisition::acq_sei(&Prediction { mean, std_dev }, g_min)
}

/// Acquisition scores over `population` given a labelled prior sample.
#[pyfunction]
#[pyo3(signature = (population, prior_x, prior_y, acquisition="pu", ilcb_lambda=DEFAULT_ILCB_LAMBDA, rounds=DEFAULT_OBJECTIVE_ROUNDS, seed=0))]
fn acquisition_scores(
    population: Vec<Vec<f64>>,
    prior_x: Vec<Vec<f64>>,
    prior_y: Vec<f64>,
    acquisition: &str,
    ilcb_lambda: f64,
    rounds: usize,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let kind = AcquisitionKind::parse(acquisition, ilcb_lambda).py()?;
    let prior = Dataset::new(matrix(&prior_x)?, prior_y).py()?;
    let units = matrix(&population)?;
    let cfg = KernelSettings::default().resolve(&prior).py()?;
    if kind.needs_objective() {
        let records = estimate_objective_records(&prior, &cfg, rounds, seed).py()?;
        let objective_cfg = KernelSettings::default().resolve(&records_dataset(&records).py()?).py()?;
        let objective = fit_objective_surrogate(&records, &objective_cfg).py()?;
        score_population(kind, &units, None, Some(&objective)).py()
    } else {
        let gp = GpPosterior::fit(&prior, &cfg).py()?;
        score_population(kind, &units, Some(&gp), None).py()
    }
}

#[pyfunction]
#[pyo3(signature = (scores, epsilon=DEFAULT_EPSILON))]
fn minmax_pi(scores: Vec<f64>, epsilon: f64) -> PyResult<Vec<f64>> {
    Ok(minmax_design(&scores, epsilon, SamplingScheme::Poisson, None).py()?.pi().to_vec())
}

/// `convention` is `one-over-n` or `n-over-n`.
#[pyfunction]
#[pyo3(signature = (population_size, sample_size, convention="one-over-n"))]
fn srs_pi(population_size: usize, sample_size: usize, convention: &str) -> PyResult<Vec<f64>> {
    let conv = SrsPiConvention::parse(convention).py()?;
    Ok(srs_design(population_size, sample_size, conv).py()?.pi().to_vec())
}

/// Sorted indices of one sample drawn under `scheme`.
#[pyfunction]
#[pyo3(signature = (pi, scheme="poisson", sample_size=None, seed=0))]
fn draw_sample(pi: Vec<f64>, scheme: &str, sample_size: Option<usize>, seed: u64) -> PyResult<Vec<usize>> {
    let d = self::scheme(scheme, sample_size, pi)?;
    Ok(design::draw(&d, seed).py()?.indices)
}

#[pyfunction]
fn ht_total(pi: Vec<f64>, sample: Vec<usize>, y_sample: Vec<f64>) -> PyResult<f64> {
    let s = SampleDraw::new(sample, pi).py()?;
    Ok(estimators::ht_total(&s, &y_sample).py()?.value)
}

/// `y` is only read on sampled units.
#[pyfunction]
#[pyo3(signature = (y, y_hat, pi, sample, normalize_pi=false))]
fn difference_total(y: Vec<f64>, y_hat: Vec<f64>, pi: Vec<f64>, sample: Vec<usize>, normalize_pi: bool) -> PyResult<f64> {
    let s = SampleDraw::new(sample, pi).py()?;
    let frame = PopulationFrame::from_values(y, y_hat).py()?;
    Ok(estimators::difference_total(&s, &frame, normalize_pi).py()?.value)
}

/// Returns `(variance, approximate)`.
#[pyfunction]
#[pyo3(signature = (y, y_hat, pi, scheme="poisson", sample_size=None))]
fn difference_variance(y: Vec<f64>, y_hat: Vec<f64>, pi: Vec<f64>, scheme: &str, sample_size: Option<usize>) -> PyResult<(f64, bool)> {
    let d = self::scheme(scheme, sample_size, pi)?;
    let frame = PopulationFrame::from_values(y, y_hat).py()?;
    let v = estimators::de_variance(&frame, &d).py()?;
    Ok((v.value, v.approximate))
}

/// Returns `(estimate, approximate, negative)`.
#[pyfunction]
#[pyo3(signature = (y, y_hat, pi, sample, scheme="poisson"))]
fn difference_variance_estimate(
    y: Vec<f64>,
    y_hat: Vec<f64>,
    pi: Vec<f64>,
    sample: Vec<usize>,
    scheme: &str,
) -> PyResult<(f64, bool, bool)> {
    let n = (scheme != "poisson").then_some(sample.len());
    let d = self::scheme(scheme, n, pi.clone())?;
    let s = SampleDraw::new(sample, pi).py()?;
    let frame = PopulationFrame::from_values(y, y_hat).py()?;
    let v = estimators::de_variance_estimate(&s, &frame, &d).py()?;
    Ok((v.value, v.approximate, v.negative))
}

/// Returns `(u, p, exact)`.
#[pyfunction]
#[pyo3(signature = (a, b, alternative="less", method="auto"))]
fn mann_whitney_u(a: Vec<f64>, b: Vec<f64>, alternative: &str, method: &str) -> PyResult<(f64, f64, bool)> {
    let alt = Alternative::parse(alternative).py()?;
    let method = match method {
        "auto" => MwuMethod::Auto,
        "exact" => MwuMethod::Exact,
        "normal" => MwuMethod::Normal,
        other => return Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    };
    let r = stats::mann_whitney_u_with(&a, &b, alt, method).py()?;
    Ok((r.u_statistic, r.p_value, r.exact))
}

/// KL(P || Q) between histograms of `truth` and `estimate` on edges spanning `truth`.
#[pyfunction]
#[pyo3(signature = (truth, estimate, bins=DEFAULT_HISTOGRAM_BINS, smoothing=DEFAULT_KL_SMOOTHING))]
fn kl_divergence(truth: Vec<f64>, estimate: Vec<f64>, bins: usize, smoothing: f64) -> PyResult<f64> {
    let lo = truth.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let edges = metrics::equal_width_edges(lo, hi, bins).py()?;
    let p = metrics::build_histogram(&truth, &edges, 0.0).py()?;
    let q = metrics::build_histogram(&estimate, &edges, smoothing).py()?;
    metrics::kl_divergence(&p, &q).py()
}

/// Returns `(features, y)`.
#[pyfunction]
#[pyo3(signature = (size=1920, dim=16, length_scale=None, signal_variance=None, noise_variance=None, seed=0))]
fn synthetic_population(
    size: usize,
    dim: usize,
    length_scale: Option<f64>,
    signal_variance: Option<f64>,
    noise_variance: Option<f64>,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let d = SyntheticSpec::default();
    let spec = SyntheticSpec {
        population_size: size,
        feature_dim: dim,
        length_scale: length_scale.unwrap_or(d.length_scale),
        signal_variance: signal_variance.unwrap_or(d.signal_variance),
        noise_variance: noise_variance.unwrap_or(d.noise_variance),
        seed,
        ..d
    };
    let frame = harness::generate_synthetic_population(&spec).py()?;
    let rows = frame.features.rows().map(<[f64]>::to_vec).collect();
    Ok((rows, frame.responses))
}

/// Runs a simulation from config text in the flat TOML format.
///
/// Returns a dict with `records` (list of dicts), `p_values`
/// (`{design: {metric: p}}`), `degraded`, `failed_repeats` and `config_hash`.
#[pyfunction]
#[pyo3(signature = (config, threads=None))]
fn simulate<'py>(py: Python<'py>, config: &str, threads: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = SimulationConfig::from_toml_str(config, None).py()?;
    if threads.is_some() {
        cfg.threads = threads;
    }
    let report = py.detach(|| harness::run_simulation(&cfg)).py()?;

    let records = report
        .records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("design", &r.design_name)?;
            d.set_item("repeat", r.repeat_index)?;
            for m in Metric::ALL {
                d.set_item(m.name(), r.get(m))?;
            }
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let p_values = PyDict::new(py);
    for e in &report.mwu {
        let inner = match p_values.get_item(&e.design)? {
            Some(d) => d.cast_into::<PyDict>()?,
            None => {
                let d = PyDict::new(py);
                p_values.set_item(&e.design, &d)?;
                d
            }
        };
        inner.set_item(e.metric.name(), e.p_value)?;
    }
    let out = PyDict::new(py);
    out.set_item("records", records)?;
    out.set_item("p_values", p_values)?;
    out.set_item("degraded", report.degraded)?;
    out.set_item("failed_repeats", report.failed_repeats)?;
    out.set_item("config_hash", &report.provenance.config_hash)?;
    Ok(out)
}

#[pymodule]
fn bosample_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<GaussianProcess>()?;
    m.add_function(wrap_pyfunction!(expected_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(improvement_variance, m)?)?;
    m.add_function(wrap_pyfunction!(scaled_expected_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(acquisition_scores, m)?)?;
    m.add_function(wrap_pyfunction!(minmax_pi, m)?)?;
    m.add_function(wrap_pyfunction!(srs_pi, m)?)?;
    m.add_function(wrap_pyfunction!(draw_sample, m)?)?;
    m.add_function(wrap_pyfunction!(ht_total, m)?)?;
    m.add_function(wrap_pyfunction!(difference_total, m)?)?;
    m.add_function(wrap_pyfunction!(difference_variance, m)?)?;
    m.add_function(wrap_pyfunction!(difference_variance_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney_u, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_population, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
