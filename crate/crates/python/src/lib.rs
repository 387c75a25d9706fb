//! Python bindings for the surrogate pipeline. The module mirrors the CLI:
//! parse one configuration, then run pipeline stages against its output
//! directory. Heavy artifacts stay on disk; the functions return paths and
//! scalar summaries, plus a `Dataset` reader for per-channel series.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyIndexError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use monorom_core::config;
use monorom_core::forcing::{self, Role, FORCING_CHANNELS};
use monorom_core::integrator::channel_names;
use monorom_core::pipeline::{self, PipelineError};

create_exception!(
    monorom,
    ThresholdExceeded,
    PyRuntimeError,
    "Aggregate steady-state NMSE exceeded the configured threshold."
);

fn to_py(e: PipelineError) -> PyErr {
    match &e {
        PipelineError::Validation(_) => PyValueError::new_err(e.to_string()),
        PipelineError::Data(_) => PyOSError::new_err(e.to_string()),
        PipelineError::Compute(_) => PyRuntimeError::new_err(e.to_string()),
        PipelineError::Threshold { .. } => ThresholdExceeded::new_err(e.to_string()),
    }
}

/// Validated run configuration; construct from INI text (empty text is the
/// reference setup) or from a file.
#[pyclass(module = "monorom")]
struct RunConfig {
    inner: config::RunConfig,
}

#[pymethods]
impl RunConfig {
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        let inner = config::RunConfig::parse(text)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(RunConfig { inner })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PyOSError::new_err(format!("{}: {e}", path.display())))?;
        Self::new(&text)
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    #[getter]
    fn output_dir(&self) -> String {
        self.inner.output_dir.display().to_string()
    }

    #[setter]
    fn set_output_dir(&mut self, dir: PathBuf) {
        self.inner.output_dir = dir;
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration
    }

    #[getter]
    fn latent_dim(&self) -> usize {
        self.inner.latent_dim
    }

    #[getter]
    fn hidden_size(&self) -> usize {
        self.inner.hidden_size
    }

    #[getter]
    fn nmse_threshold(&self) -> f64 {
        self.inner.nmse_threshold
    }

    fn __repr__(&self) -> String {
        format!(
            "RunConfig(master_seed={}, output_dir='{}', duration={}, latent_dim={}, hidden_size={})",
            self.inner.master_seed,
            self.inner.output_dir.display(),
            self.inner.duration,
            self.inner.latent_dim,
            self.inner.hidden_size
        )
    }
}

/// One stored dataset: the four load channels plus the simulated (or
/// predicted) response, all sampled on the same grid.
#[pyclass(module = "monorom", frozen)]
struct Dataset {
    #[pyo3(get)]
    dt: f64,
    #[pyo3(get)]
    scenario_id: usize,
    #[pyo3(get)]
    seed: u64,
    #[pyo3(get)]
    role: String,
    inner: forcing::Dataset,
}

#[pymethods]
impl Dataset {
    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.forcing.n_samples()
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.forcing.duration()
    }

    /// Load channel names, in column order.
    #[getter]
    fn forcing_channels(&self) -> Vec<String> {
        FORCING_CHANNELS.iter().map(|s| s.to_string()).collect()
    }

    /// Response channel names, in column order.
    #[getter]
    fn response_channels(&self) -> Vec<String> {
        channel_names(self.inner.response.n_channels() / 2)
    }

    fn forcing_channel(&self, index: usize) -> PyResult<Vec<f64>> {
        if index >= self.inner.forcing.data.ncols() {
            return Err(PyIndexError::new_err(format!(
                "forcing channel {index} out of range 0..{}",
                self.inner.forcing.data.ncols()
            )));
        }
        Ok(self.inner.forcing.data.column(index).iter().copied().collect())
    }

    fn response_channel(&self, index: usize) -> PyResult<Vec<f64>> {
        if index >= self.inner.response.n_channels() {
            return Err(PyIndexError::new_err(format!(
                "response channel {index} out of range 0..{}",
                self.inner.response.n_channels()
            )));
        }
        Ok(self.inner.response.data.column(index).iter().copied().collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(scenario_id={}, role='{}', n_samples={}, channels={})",
            self.scenario_id,
            self.role,
            self.n_samples(),
            self.inner.response.n_channels()
        )
    }
}

/// Read a dataset or prediction file.
#[pyfunction]
fn read_dataset(path: PathBuf) -> PyResult<Dataset> {
    let ds = forcing::read_dataset(&path).map_err(|e| PyOSError::new_err(e.to_string()))?;
    Ok(Dataset {
        dt: ds.forcing.dt,
        scenario_id: ds.forcing.scenario_id,
        seed: ds.forcing.seed,
        role: match ds.role {
            Role::Train => "train".to_string(),
            Role::Test => "test".to_string(),
        },
        inner: ds,
    })
}

/// Simulate the whole scenario corpus; returns the dataset paths.
#[pyfunction]
#[pyo3(signature = (config, threads = 1))]
fn generate(config: &RunConfig, threads: usize) -> PyResult<Vec<String>> {
    if threads == 0 {
        return Err(PyValueError::new_err("threads must be at least 1"));
    }
    let s = pipeline::cmd_generate(&config.inner, threads).map_err(to_py)?;
    Ok(s.files.iter().map(|p| p.display().to_string()).collect())
}

/// Simulate a single corpus scenario; returns the dataset path.
#[pyfunction]
fn simulate(config: &RunConfig, scenario: usize) -> PyResult<String> {
    let p = pipeline::cmd_simulate(&config.inner, scenario).map_err(to_py)?;
    Ok(p.display().to_string())
}

fn train_dict(py: Python<'_>, s: &pipeline::TrainSummary) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("weights", s.weights.display().to_string())?;
    d.set_item("log", s.log.display().to_string())?;
    d.set_item("epochs_run", s.epochs_run)?;
    d.set_item("best_val_loss", s.best_val_loss)?;
    if !s.latent_std.is_empty() {
        d.set_item("latent_std", s.latent_std.clone())?;
        d.set_item("collapsed_latents", s.collapsed_latents.clone())?;
    }
    Ok(d.into())
}

/// Train the snapshot autoencoder on the stored training datasets.
#[pyfunction]
fn train_autoencoder(py: Python<'_>, config: &RunConfig) -> PyResult<Py<PyDict>> {
    let s = pipeline::cmd_train_ae(&config.inner).map_err(to_py)?;
    train_dict(py, &s)
}

/// Train the latent dynamics network against the stored autoencoder.
#[pyfunction]
fn train_dynamics(py: Python<'_>, config: &RunConfig) -> PyResult<Py<PyDict>> {
    let s = pipeline::cmd_train_rom(&config.inner).map_err(to_py)?;
    train_dict(py, &s)
}

/// Both training stages in order; returns (autoencoder, dynamics) summaries.
#[pyfunction]
fn train(py: Python<'_>, config: &RunConfig) -> PyResult<(Py<PyDict>, Py<PyDict>)> {
    let (ae, rom) = pipeline::cmd_train(&config.inner).map_err(to_py)?;
    Ok((train_dict(py, &ae)?, train_dict(py, &rom)?))
}

/// Free-running surrogate rollout over the held-out scenario.
#[pyfunction]
fn predict(py: Python<'_>, config: &RunConfig) -> PyResult<Py<PyDict>> {
    let s = pipeline::cmd_predict(&config.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item(
        "files",
        s.files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    )?;
    d.set_item("rom_seconds", s.rom_seconds)?;
    Ok(d.into())
}

/// Score the stored prediction; raises ThresholdExceeded past the gate.
#[pyfunction]
fn evaluate(py: Python<'_>, config: &RunConfig) -> PyResult<Py<PyDict>> {
    let s = pipeline::cmd_evaluate(&config.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("report", s.report.display().to_string())?;
    d.set_item("aggregate_nmse", s.aggregate_nmse)?;
    d.set_item("transient_aggregate_nmse", s.transient_aggregate_nmse)?;
    Ok(d.into())
}

/// Time the simulator against the surrogate; returns metrics and timing.
#[pyfunction]
#[pyo3(name = "bench")]
fn bench_pipeline(py: Python<'_>, config: &RunConfig) -> PyResult<Py<PyDict>> {
    let s = pipeline::cmd_bench(&config.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("report", s.report.display().to_string())?;
    d.set_item("aggregate_nmse", s.aggregate_nmse)?;
    d.set_item("fom_seconds", s.timing.fom_seconds)?;
    d.set_item("rom_seconds", s.timing.rom_seconds)?;
    d.set_item("speedup", s.timing.speedup)?;
    Ok(d.into())
}

/// Every configuration key as (section, key, default, units, help).
#[pyfunction]
fn config_keys() -> Vec<(String, String, String, String, String)> {
    config::CONFIG_KEYS
        .iter()
        .map(|k| {
            (
                k.section.to_string(),
                k.key.to_string(),
                k.default.to_string(),
                k.units.to_string(),
                k.help.to_string(),
            )
        })
        .collect()
}

#[pymodule]
fn monorom(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<RunConfig>()?;
    m.add_class::<Dataset>()?;
    m.add("ThresholdExceeded", m.py().get_type::<ThresholdExceeded>())?;
    m.add_function(wrap_pyfunction!(read_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(train_autoencoder, m)?)?;
    m.add_function(wrap_pyfunction!(train_dynamics, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(bench_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(config_keys, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
