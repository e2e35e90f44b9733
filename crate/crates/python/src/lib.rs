//! Python bindings. Matrices cross the boundary as lists of rows.

use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use flycom::analysis::{dtd_error as dtd_error_rs, error_decomposition};
use flycom::config::{emit_config, parse_config, ExperimentConfig, Mode, NoiseSpec};
use flycom::detector::{ml_subspace, EffectiveObservation};
use flycom::harness::{self, PairedSlot, ResultRow, SummaryRow};
use flycom::selection::optimize_threshold as optimize_threshold_rs;
use flycom::tensor::synth_unfolding as synth_unfolding_rs;
use flycom::FlycomError;

fn py_err(err: FlycomError) -> PyErr {
    match err {
        FlycomError::Io(_) => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

/// Row-major matrix as seen from Python.
type Rows = Vec<Vec<f64>>;

fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if n == 0 || c == 0 || rows.iter().any(|r| r.len() != c) {
        return Err(PyValueError::new_err(
            "expected a non-empty rectangular list of rows",
        ));
    }
    Ok(DMatrix::from_fn(n, c, |i, j| rows[i][j]))
}

/// Experiment configuration; round-trips through the TOML text format.
#[pyclass(name = "ExperimentConfig", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn reference_defaults() -> Self {
        Self {
            inner: ExperimentConfig::reference_defaults(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_config(text).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> String {
        emit_config(&self.inner)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(py_err)
    }

    fn estimate_schedule(&self) -> Vec<usize> {
        self.inner.estimate_schedule()
    }

    fn config_hash(&self) -> String {
        harness::config_hash(&self.inner)
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2()
    }

    #[setter]
    fn set_sigma2(&mut self, v: f64) {
        self.inner.noise = NoiseSpec::Sigma2(v);
    }

    #[setter]
    fn set_snr_db(&mut self, v: f64) {
        self.inner.noise = NoiseSpec::SnrDb(v);
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.as_str()
    }

    #[setter]
    fn set_mode(&mut self, v: &str) -> PyResult<()> {
        self.inner.mode =
            Mode::parse(v).ok_or_else(|| PyValueError::new_err(format!("unknown mode {v:?}")))?;
        Ok(())
    }

    #[getter]
    fn trials(&self) -> usize {
        self.inner.trials
    }

    #[setter]
    fn set_trials(&mut self, v: usize) {
        self.inner.trials = v;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }

    #[getter]
    fn t_max(&self) -> usize {
        self.inner.t_max
    }

    #[setter]
    fn set_t_max(&mut self, v: usize) {
        self.inner.t_max = v;
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[setter]
    fn set_m(&mut self, v: usize) {
        self.inner.m = v;
    }

    #[getter]
    fn xi(&self) -> f64 {
        self.inner.xi
    }

    #[setter]
    fn set_xi(&mut self, v: f64) {
        self.inner.xi = v;
    }

    #[getter]
    fn schedule(&self) -> Option<Vec<usize>> {
        self.inner.schedule.clone()
    }

    #[setter]
    fn set_schedule(&mut self, v: Option<Vec<usize>>) {
        self.inner.schedule = v;
    }

    #[getter]
    fn output(&self) -> PathBuf {
        self.inner.output.clone()
    }

    #[setter]
    fn set_output(&mut self, v: PathBuf) {
        self.inner.output = v;
    }

    fn __repr__(&self) -> String {
        format!(
            "ExperimentConfig(mode={:?}, I={}, J={}, r={}, M={}, t_max={}, trials={}, seed={})",
            self.inner.mode.as_str(),
            self.inner.rows,
            self.inner.cols,
            self.inner.r,
            self.inner.m,
            self.inner.t_max,
            self.inner.trials,
            self.inner.seed
        )
    }
}

/// One estimate of one trial.
#[pyclass(name = "ResultRow", get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyResultRow {
    trial: usize,
    slot: usize,
    communication_time: usize,
    mode: &'static str,
    error: f64,
    sketch_term: f64,
    residual_term: f64,
    theorem1_bound: Option<f64>,
    delta_ok: Option<f64>,
    delta_mean: Option<f64>,
    m_tilde: Option<usize>,
    eta_th: Option<f64>,
    fallback: Option<bool>,
    power_ratio_max: Option<f64>,
    power_gap_max: Option<f64>,
}

impl From<&ResultRow> for PyResultRow {
    fn from(r: &ResultRow) -> Self {
        Self {
            trial: r.trial,
            slot: r.slot,
            communication_time: r.communication_time,
            mode: r.mode.as_str(),
            error: r.error,
            sketch_term: r.sketch_term,
            residual_term: r.residual_term,
            theorem1_bound: r.theorem1_bound,
            delta_ok: r.delta_ok,
            delta_mean: r.delta_mean,
            m_tilde: r.m_tilde,
            eta_th: r.eta_th,
            fallback: r.fallback,
            power_ratio_max: r.power_ratio_max,
            power_gap_max: r.power_gap_max,
        }
    }
}

/// Per-(mode, slot) aggregate.
#[pyclass(name = "SummaryRow", get_all, skip_from_py_object)]
#[derive(Clone)]
struct PySummaryRow {
    mode: &'static str,
    slot: usize,
    communication_time: usize,
    trials: usize,
    mean_error: f64,
    ci95: f64,
    mean_residual: f64,
    mean_bound: Option<f64>,
    mean_delta: Option<f64>,
    delta_compliance: Option<f64>,
}

impl From<&SummaryRow> for PySummaryRow {
    fn from(s: &SummaryRow) -> Self {
        Self {
            mode: s.mode.as_str(),
            slot: s.slot,
            communication_time: s.communication_time,
            trials: s.trials,
            mean_error: s.mean_error,
            ci95: s.ci95,
            mean_residual: s.mean_residual,
            mean_bound: s.mean_bound,
            mean_delta: s.mean_delta,
            delta_compliance: s.delta_compliance,
        }
    }
}

/// Paired selection comparison at one slot.
#[pyclass(name = "PairedSlot", get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyPairedSlot {
    slot: usize,
    mean_without: f64,
    mean_with: f64,
    mean_diff: f64,
    p_less: f64,
    fallback_trials: usize,
}

impl From<&PairedSlot> for PyPairedSlot {
    fn from(p: &PairedSlot) -> Self {
        Self {
            slot: p.slot,
            mean_without: p.mean_without,
            mean_with: p.mean_with,
            mean_diff: p.test.mean_diff,
            p_less: p.test.p_less,
            fallback_trials: p.fallback_trials,
        }
    }
}

/// Run every trial; returns `(rows, summary)`.
#[pyfunction]
#[pyo3(signature = (config, threads=None))]
fn run_experiment(
    py: Python<'_>,
    config: &PyConfig,
    threads: Option<usize>,
) -> PyResult<(Vec<PyResultRow>, Vec<PySummaryRow>)> {
    let cfg = config.inner.clone();
    let out = py
        .detach(|| harness::run_experiment(&cfg, threads))
        .map_err(py_err)?;
    Ok((
        out.rows.iter().map(Into::into).collect(),
        out.summary.iter().map(Into::into).collect(),
    ))
}

/// Paired with/without-selection comparison at every scheduled slot.
#[pyfunction]
#[pyo3(signature = (config, threads=None))]
fn compare_selection(
    py: Python<'_>,
    config: &PyConfig,
    threads: Option<usize>,
) -> PyResult<Vec<PyPairedSlot>> {
    let cfg = config.inner.clone();
    let cmp = py
        .detach(|| harness::compare_selection(&cfg, threads))
        .map_err(py_err)?;
    Ok(cmp.slots.iter().map(Into::into).collect())
}

/// Per-trial rows as the CSV text the CLI writes.
#[pyfunction]
#[pyo3(signature = (config, threads=None))]
fn rows_to_csv(config: &PyConfig, threads: Option<usize>) -> PyResult<String> {
    let out = harness::run_experiment(&config.inner, threads).map_err(py_err)?;
    Ok(harness::rows_to_csv(&out.rows))
}

/// Synthetic `I×J` unfolding; returns `(X, singular_values, principal_basis)`.
#[pyfunction]
fn synth_unfolding(
    rows: usize,
    cols: usize,
    r: usize,
    xi: f64,
    seed: u64,
) -> PyResult<(Rows, Vec<f64>, Rows)> {
    let (x, truth) = synth_unfolding_rs(rows, cols, r, xi, seed).map_err(py_err)?;
    Ok((
        to_rows(&x),
        truth.singular_values.clone(),
        to_rows(&truth.principal_basis()),
    ))
}

/// Threshold minimizing the selection objective; returns
/// `(threshold, objective, m_tilde, fallback)`.
#[pyfunction]
fn optimize_threshold(
    eta: Vec<f64>,
    r: usize,
    m: usize,
    sigma2: f64,
    global_trace: f64,
) -> PyResult<(f64, f64, usize, bool)> {
    let c = optimize_threshold_rs(&eta, r, m, sigma2, global_trace).map_err(py_err)?;
    Ok((c.threshold, c.objective, c.m_tilde, c.fallback))
}

/// Top-`r` eigenvectors of `Φ Φ^T` for a whitened observation `Φ`; returns
/// `(basis, eigenvalues)`.
#[pyfunction]
fn detect_subspace(phi: Vec<Vec<f64>>, r: usize) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let obs = EffectiveObservation {
        slot: 0,
        phi: from_rows(&phi)?,
        included_slots: Vec::new(),
    };
    let est = ml_subspace(&obs, r).map_err(py_err)?;
    Ok((to_rows(&est.basis), est.eigenvalues))
}

/// `‖X − Ũ Ũ^T X‖_F²`.
#[pyfunction]
fn dtd_error(basis: Vec<Vec<f64>>, x: Vec<Vec<f64>>) -> PyResult<f64> {
    dtd_error_rs(&from_rows(&basis)?, &from_rows(&x)?).map_err(py_err)
}

/// `(sketch_term, residual_term)` of an estimate against a synthetic unfolding.
#[pyfunction]
fn decompose_error(
    basis: Vec<Vec<f64>>,
    rows: usize,
    cols: usize,
    r: usize,
    xi: f64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let (_, truth) = synth_unfolding_rs(rows, cols, r, xi, seed).map_err(py_err)?;
    error_decomposition(&from_rows(&basis)?, &truth).map_err(py_err)
}

/// Device-side cost table as CSV.
#[pyfunction]
fn cost_table(rows: usize, m: usize, samples: Vec<usize>, ranks: Vec<usize>) -> String {
    harness::cost_table_csv(&harness::cost_table(rows, m, &samples, &ranks))
}

#[pymodule]
fn pyflycom(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyResultRow>()?;
    m.add_class::<PySummaryRow>()?;
    m.add_class::<PyPairedSlot>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(compare_selection, m)?)?;
    m.add_function(wrap_pyfunction!(rows_to_csv, m)?)?;
    m.add_function(wrap_pyfunction!(synth_unfolding, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(detect_subspace, m)?)?;
    m.add_function(wrap_pyfunction!(dtd_error, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_error, m)?)?;
    m.add_function(wrap_pyfunction!(cost_table, m)?)?;
    Ok(())
}
