//! Python bindings: bin statistics, WTG labels, ranking metrics, synthetic
//! data and whole pipeline runs.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use dvr_core::binstats::{BinStatistics, DurationBinner, OutOfRangePolicy, StreamOutcome, DEFAULT_MIN_BIN_COUNT};
use dvr_core::experiment::{self, DataSource, ExperimentConfig, RunReport, Strategy};
use dvr_core::metrics::{self, RankedItem, RankedList};
use dvr_core::synth::{self, SynthConfig};
use dvr_core::{ingest, wtg, Error, ErrorKind};

create_exception!(dvr, DvrError, PyException);
create_exception!(dvr, ConfigError, DvrError);
create_exception!(dvr, DataError, DvrError);
create_exception!(dvr, NumericalError, DvrError);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.kind() {
        ErrorKind::Config => ConfigError::new_err(msg),
        ErrorKind::Data => DataError::new_err(msg),
        ErrorKind::Numerical => NumericalError::new_err(msg),
    }
}

#[pyclass(name = "DurationBinner", module = "dvr", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBinner {
    inner: DurationBinner,
}

#[pymethods]
impl PyBinner {
    #[new]
    #[pyo3(signature = (min_duration=5.0, max_duration=60.0, bin_width=1.0))]
    fn new(min_duration: f64, max_duration: f64, bin_width: f64) -> PyResult<Self> {
        DurationBinner::new(min_duration, max_duration, bin_width)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn bins(&self) -> usize {
        self.inner.bins()
    }

    fn bin_of(&self, duration: f64) -> PyResult<usize> {
        self.inner.bin_of(duration).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "DurationBinner({}, {}, {})",
            self.inner.min_duration(),
            self.inner.max_duration(),
            self.inner.bin_width()
        )
    }
}

#[pyclass(name = "BinStatistics", module = "dvr", skip_from_py_object)]
#[derive(Clone)]
struct PyStats {
    inner: BinStatistics,
}

#[pymethods]
impl PyStats {
    /// Empty statistics for streaming updates.
    #[new]
    #[pyo3(signature = (binner, min_bin_count=DEFAULT_MIN_BIN_COUNT))]
    fn new(binner: &PyBinner, min_bin_count: u64) -> Self {
        Self {
            inner: BinStatistics::empty(binner.inner, min_bin_count),
        }
    }

    /// Batch fit over `(watch_time, duration)` pairs.
    #[staticmethod]
    #[pyo3(signature = (binner, pairs, min_bin_count=DEFAULT_MIN_BIN_COUNT))]
    fn fit(binner: &PyBinner, pairs: Vec<(f64, f64)>, min_bin_count: u64) -> PyResult<Self> {
        BinStatistics::fit_pairs(binner.inner, &pairs, min_bin_count)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// Folds one event in; returns its bin, or `None` when out of range.
    fn update(&mut self, watch_time: f64, duration: f64) -> PyResult<Option<usize>> {
        match self
            .inner
            .stream_update(watch_time, duration, OutOfRangePolicy::Skip)
            .map_err(to_py)?
        {
            StreamOutcome::Updated(b) => Ok(Some(b)),
            StreamOutcome::Skipped => Ok(None),
        }
    }

    fn merge(&self, other: &PyStats) -> PyResult<Self> {
        self.inner.merge(&other.inner).map(|inner| Self { inner }).map_err(to_py)
    }

    fn count(&self, bin: usize) -> PyResult<u64> {
        self.check(bin)?;
        Ok(self.inner.count(bin))
    }

    fn mean(&self, bin: usize) -> PyResult<f64> {
        self.check(bin)?;
        Ok(self.inner.mean(bin))
    }

    fn std(&self, bin: usize) -> PyResult<f64> {
        self.check(bin)?;
        Ok(self.inner.std_dev(bin))
    }

    #[getter]
    fn total_count(&self) -> u64 {
        self.inner.total_count()
    }

    #[getter]
    fn skipped(&self) -> u64 {
        self.inner.skipped()
    }

    fn underpopulated_bins(&self) -> Vec<usize> {
        self.inner.underpopulated_bins()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.snapshot())
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        BinStatistics::restore(data).map(|inner| Self { inner }).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        BinStatistics::load(&path).map(|inner| Self { inner }).map_err(to_py)
    }
}

impl PyStats {
    fn check(&self, bin: usize) -> PyResult<()> {
        if bin >= self.inner.binner().bins() {
            return Err(pyo3::exceptions::PyIndexError::new_err(format!("bin {bin} out of range")));
        }
        Ok(())
    }
}

/// WTG of one event: `(value, valid)`.
#[pyfunction]
fn compute_wtg(watch_time: f64, duration: f64, stats: &PyStats) -> PyResult<(f64, bool)> {
    wtg::compute_wtg(watch_time, duration, &stats.inner)
        .map(|l| (l.value, l.valid))
        .map_err(to_py)
}

/// Watch time whose WTG under `stats` is `gain`.
#[pyfunction]
fn wtg_to_watch_time(gain: f64, duration: f64, stats: &PyStats) -> PyResult<f64> {
    wtg::wtg_to_watch_time(gain, duration, &stats.inner).map_err(to_py)
}

/// Labels a delimited log and writes it with `wtg` and `wtg_valid` columns.
/// Returns the number of records without a valid label.
#[pyfunction]
fn annotate_file(input: PathBuf, stats: &PyStats, output: PathBuf) -> PyResult<usize> {
    let (ds, _) = ingest::read_dataset(&input, &ingest::FormatConfig::default()).map_err(to_py)?;
    let annotated = wtg::annotate_dataset(&ds, &stats.inner).map_err(to_py)?;
    annotated.write_file(&output).map_err(to_py)?;
    Ok(annotated.invalid)
}

fn ranked(wtgs: &[f64]) -> RankedList {
    let n = wtgs.len();
    let items = wtgs
        .iter()
        .enumerate()
        .map(|(i, &g)| RankedItem {
            video_id: format!("{i:08}"),
            score: (n - i) as f64,
            watch_time: 0.0,
            wtg: g,
            duration: 0.0,
            producer_id: String::new(),
        })
        .collect();
    RankedList::new("user", items)
}

/// Mean WTG of the first `k` entries of an already ranked list.
#[pyfunction]
fn wtg_at_k(wtgs: Vec<f64>, k: usize) -> PyResult<f64> {
    metrics::wtg_at_k(&ranked(&wtgs), k).map(|a| a.value).map_err(to_py)
}

/// Position-discounted WTG of the first `k` entries of an already ranked list.
#[pyfunction]
fn dcwtg_at_k(wtgs: Vec<f64>, k: usize) -> PyResult<f64> {
    metrics::dcwtg_at_k(&ranked(&wtgs), k).map(|a| a.value).map_err(to_py)
}

/// Writes a synthetic log (and optionally its ground truth) and returns the row count.
#[pyfunction]
#[pyo3(signature = (output, seed=0, n_users=None, n_videos=None, interactions_per_user=None, truth=None))]
fn generate_synthetic(
    output: PathBuf,
    seed: u64,
    n_users: Option<usize>,
    n_videos: Option<usize>,
    interactions_per_user: Option<usize>,
    truth: Option<PathBuf>,
) -> PyResult<usize> {
    let mut cfg = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    if let Some(v) = n_users {
        cfg.n_users = v;
    }
    if let Some(v) = n_videos {
        cfg.n_videos = v;
    }
    if let Some(v) = interactions_per_user {
        cfg.interactions_per_user = v;
    }
    let (ds, gt) = synth::generate(&cfg).map_err(to_py)?;
    ingest::write_dataset_file(&ds, &output).map_err(to_py)?;
    if let Some(p) = truth {
        gt.save(&p).map_err(to_py)?;
    }
    Ok(ds.len())
}

fn report_dict<'py>(py: Python<'py>, report: &RunReport) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("strategy", &report.strategy)?;
    out.set_item("k", report.eval.k)?;
    let models = PyDict::new(py);
    for (name, m) in &report.eval.models {
        let d = PyDict::new(py);
        d.set_item("wtg_at_k", m.wtg_at_k)?;
        d.set_item("dcwtg_at_k", m.dcwtg_at_k)?;
        d.set_item("bc_at_k", m.bc_at_k)?;
        d.set_item("watch_time_at_k", m.watch_time_at_k)?;
        d.set_item("traffic_long", m.traffic_long)?;
        models.set_item(name, d)?;
    }
    out.set_item("models", models)?;
    Ok(out)
}

/// Runs the full pipeline into `out_dir` and returns the headline metrics.
///
/// Without `input` the run uses synthetic data; `config` is an optional TOML
/// experiment configuration that the keyword arguments override.
#[pyfunction]
#[pyo3(signature = (out_dir, strategy="full", seed=0, input=None, config=None, alpha=None, max_epochs=None, n_users=None))]
#[allow(clippy::too_many_arguments)]
fn run_pipeline<'py>(
    py: Python<'py>,
    out_dir: PathBuf,
    strategy: &str,
    seed: u64,
    input: Option<PathBuf>,
    config: Option<&str>,
    alpha: Option<f64>,
    max_epochs: Option<usize>,
    n_users: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = match config {
        Some(text) => ExperimentConfig::from_toml(text).map_err(to_py)?,
        None => ExperimentConfig::default(),
    };
    cfg.seed = seed;
    cfg.strategy = strategy.parse::<Strategy>().map_err(to_py)?;
    if let Some(path) = input {
        cfg.data = DataSource::File {
            path,
            format: ingest::FormatConfig::default(),
        };
    }
    if let (DataSource::Synth(s), Some(n)) = (&mut cfg.data, n_users) {
        s.n_users = n;
    }
    if let Some(a) = alpha {
        cfg.train.alpha = a;
    }
    if let Some(e) = max_epochs {
        cfg.train.max_epochs = e;
    }
    let report = py
        .detach(|| experiment::cmd_pipeline(&cfg, &out_dir))
        .map_err(to_py)?;
    report_dict(py, &report)
}

/// Aligned comparison table of completed run directories.
#[pyfunction]
fn compare_runs(run_dirs: Vec<PathBuf>) -> PyResult<String> {
    experiment::cmd_compare(&run_dirs).map(|c| c.to_text()).map_err(to_py)
}

#[pymodule]
fn dvr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("DvrError", py.get_type::<DvrError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add_class::<PyBinner>()?;
    m.add_class::<PyStats>()?;
    m.add_function(wrap_pyfunction!(compute_wtg, m)?)?;
    m.add_function(wrap_pyfunction!(wtg_to_watch_time, m)?)?;
    m.add_function(wrap_pyfunction!(annotate_file, m)?)?;
    m.add_function(wrap_pyfunction!(wtg_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(dcwtg_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(compare_runs, m)?)?;
    Ok(())
}
