//! Python bindings: the channel, the erasure-count distribution, the mean
//! AoI formulas and the simulator, importable as `aoi_mds`.
//!
//! Simulation configs and reports cross the boundary as JSON strings using
//! the same schema as the CLI.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use aoi_mds_core::aoi::{self, AoiMode, SystemConfig};
use aoi_mds_core::channel;
use aoi_mds_core::erasure;
use aoi_mds_core::gaussian;
use aoi_mds_core::sim;

fn value_error(err: aoi_mds_core::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

/// Gilbert-Elliot channel parameters (alpha, beta, eps0, eps1).
#[pyclass(name = "GEParams", frozen, skip_from_py_object)]
struct PyGEParams {
    inner: channel::GEParams,
}

#[pymethods]
impl PyGEParams {
    #[new]
    fn new(alpha: f64, beta: f64, eps0: f64, eps1: f64) -> PyResult<Self> {
        channel::GEParams::new(alpha, beta, eps0, eps1)
            .map(|inner| Self { inner })
            .map_err(value_error)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn eps0(&self) -> f64 {
        self.inner.eps0()
    }

    #[getter]
    fn eps1(&self) -> f64 {
        self.inner.eps1()
    }

    /// Stationary probability of the good state.
    fn steady_state_good(&self) -> f64 {
        self.inner.steady_state_good()
    }

    fn steady_state_bad(&self) -> f64 {
        self.inner.steady_state_bad()
    }

    /// Stationary per-use erasure probability.
    fn marginal_erasure_prob(&self) -> f64 {
        self.inner.marginal_erasure_prob()
    }

    /// Relabels the good and bad states; the erasure law is unchanged.
    fn reversed(&self) -> Self {
        Self {
            inner: self.inner.reversed(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "GEParams(alpha={}, beta={}, eps0={}, eps1={})",
            self.inner.alpha(),
            self.inner.beta(),
            self.inner.eps0(),
            self.inner.eps1()
        )
    }
}

/// P(n, e) over a window of n channel uses; method is "dp" or "closed".
#[pyfunction]
#[pyo3(signature = (n, params, method = "dp"))]
fn erasure_pmf(n: usize, params: &PyGEParams, method: &str) -> PyResult<Vec<f64>> {
    match method {
        "dp" => Ok(erasure::erasure_pmf_dp(n, &params.inner).probs().to_vec()),
        "closed" => erasure::erasure_pmf_closed(n, &params.inner)
            .map(|pmf| pmf.probs().to_vec())
            .map_err(value_error),
        other => Err(PyValueError::new_err(format!(
            "unknown method {other:?} (expected \"dp\" or \"closed\")"
        ))),
    }
}

/// Block error probability of an (n, k)-MDS code over n channel uses.
#[pyfunction]
fn bep_mds(n: usize, k: usize, params: &PyGEParams) -> f64 {
    erasure::bep_mds(n, k, &params.inner)
}

/// Mean AoI of the uncoded system; infinity when p = 1.
#[pyfunction]
#[pyo3(signature = (sources, ell, p, exact = true))]
fn uncoded_aoi(sources: u64, ell: u64, p: f64, exact: bool) -> f64 {
    let mode = if exact { AoiMode::Exact } else { AoiMode::LargeK };
    aoi::uncoded_aoi(sources, ell, p, mode).mean_aoi
}

/// P(X = x K ell) = (1 - p) p^(x-1) for the uncoded inter-arrival time.
#[pyfunction]
fn uncoded_interarrival_pmf(x: u64, p: f64) -> f64 {
    aoi::uncoded_interarrival_pmf(x, p)
}

/// Per-block event probabilities (clean, recovered, lost) for one source.
#[pyfunction]
fn event_probs(n: u64, k: u64, params: &PyGEParams) -> (f64, f64, f64) {
    let ev = aoi::event_probs_for_code(n, k, &params.inner);
    (ev.p_a, ev.p_b, ev.p_c)
}

/// Exact per-source mean AoI of the coded system (requires k | K).
#[pyfunction]
fn coded_aoi_exact(
    source: u64,
    sources: u64,
    ell: u64,
    n: u64,
    k: u64,
    params: &PyGEParams,
) -> PyResult<f64> {
    let cfg = SystemConfig::new(sources, ell, n, k).map_err(value_error)?;
    Ok(aoi::coded_aoi_exact(source, &cfg, &params.inner).mean_aoi)
}

/// Large-K generic-source approximation (K / k treated as real-valued).
#[pyfunction]
fn coded_aoi_approx(n: u64, k: u64, sources: u64, ell: u64, params: &PyGEParams) -> f64 {
    aoi::coded_aoi_approx(n, k, sources, ell, &params.inner).mean_aoi
}

/// First two inter-arrival moments of the coded system for one source.
#[pyfunction]
fn coded_interarrival_moments(
    source: u64,
    sources: u64,
    ell: u64,
    n: u64,
    k: u64,
    params: &PyGEParams,
) -> PyResult<(f64, f64)> {
    let cfg = SystemConfig::new(sources, ell, n, k).map_err(value_error)?;
    let ev = aoi::event_probs(&cfg, &params.inner);
    let m = aoi::coded_interarrival_moments(source, &cfg, &ev);
    Ok((m.mean, m.second_moment))
}

/// CLT approximation of the coded mean AoI at slack c_n.
#[pyfunction]
fn gaussian_aoi(c_n: f64, n: u64, sources: u64, ell: u64, p: f64) -> PyResult<f64> {
    gaussian::gaussian_aoi(c_n, n, sources, ell, p)
        .map(|r| r.mean_aoi)
        .map_err(value_error)
}

/// Regional form of the CLT approximation; returns (aoi, region 1|2|3).
#[pyfunction]
fn region_aoi(c_n: f64, n: u64, sources: u64, ell: u64, p: f64, c_eps: f64) -> PyResult<(f64, u8)> {
    gaussian::region_aoi(c_n, n, sources, ell, p, c_eps)
        .map(|(r, region)| {
            let tag = match region {
                gaussian::Region::Region1 => 1,
                gaussian::Region::Region2 => 2,
                gaussian::Region::Region3 => 3,
            };
            (r.mean_aoi, tag)
        })
        .map_err(value_error)
}

/// Smallest c > 0 with exp(-c^2)/c <= eps.
#[pyfunction]
fn calibrate_c_eps(eps: f64) -> f64 {
    gaussian::calibrate_c_eps(eps)
}

/// Standard normal CDF.
#[pyfunction]
fn normal_cdf(x: f64) -> f64 {
    gaussian::normal_cdf(x)
}

/// Exhaustive block-size optimizer; returns (k_star, mean_aoi).
#[pyfunction]
fn optimal_k(n: u64, params: &PyGEParams, sources: u64, ell: u64) -> (u64, f64) {
    let (k_star, aoi) = aoi::optimal_k(n, &params.inner, sources, ell);
    (k_star, aoi.mean_aoi)
}

/// Coding gain at the optimal block size, as a dict.
#[pyfunction]
fn coding_gain<'py>(
    py: Python<'py>,
    n: u64,
    params: &PyGEParams,
    sources: u64,
    ell: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let gain = aoi::coding_gain(n, &params.inner, sources, ell);
    let dict = PyDict::new(py);
    dict.set_item("k_star", gain.k_star)?;
    dict.set_item("gain", gain.gain)?;
    dict.set_item("aoi_coded", gain.aoi_coded)?;
    dict.set_item("aoi_uncoded", gain.aoi_uncoded)?;
    dict.set_item("ceiling", gain.ceiling)?;
    Ok(dict)
}

/// Runs a simulation from a JSON config string (schema_version 1) and
/// returns the report as a JSON string.
#[pyfunction]
fn simulate(config_json: &str) -> PyResult<String> {
    let cfg: sim::SimConfig = serde_json::from_str(config_json)
        .map_err(|e| PyValueError::new_err(format!("invalid simulation config: {e}")))?;
    let report = sim::simulate(&cfg).map_err(value_error)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Histogram of erasure counts over independent stationary windows.
#[pyfunction]
fn estimate_erasure_pmf(n: usize, windows: u64, params: &PyGEParams, seed: u64) -> Vec<u64> {
    sim::estimate_erasure_pmf(n, windows, &params.inner, seed)
}

#[pymodule]
fn aoi_mds(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGEParams>()?;
    m.add_function(wrap_pyfunction!(erasure_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(bep_mds, m)?)?;
    m.add_function(wrap_pyfunction!(uncoded_aoi, m)?)?;
    m.add_function(wrap_pyfunction!(uncoded_interarrival_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(event_probs, m)?)?;
    m.add_function(wrap_pyfunction!(coded_aoi_exact, m)?)?;
    m.add_function(wrap_pyfunction!(coded_aoi_approx, m)?)?;
    m.add_function(wrap_pyfunction!(coded_interarrival_moments, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_aoi, m)?)?;
    m.add_function(wrap_pyfunction!(region_aoi, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_c_eps, m)?)?;
    m.add_function(wrap_pyfunction!(normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_k, m)?)?;
    m.add_function(wrap_pyfunction!(coding_gain, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_erasure_pmf, m)?)?;
    Ok(())
}
