//! The operations behind the command-line subcommands: generate datasets,
//! train both model stages, predict, evaluate, benchmark.
//!
//! Every command takes the one validated `RunConfig` and works inside the
//! resolved output directory (the config's `output_dir`, overridable with
//! the `MONOROM_OUT_DIR` environment variable). File layout:
//!
//! ```text
//! out/
//!   datasets/dataset_NN.csv      simulated corpus, one file per scenario
//!   manifest.txt                 sha256 of every dataset file
//!   weights/autoencoder.txt      trained compression stage
//!   weights/dynamics.txt         trained latent dynamics stage
//!   logs/ae_training.csv         per-epoch losses
//!   logs/dynamics_training.csv
//!   predictions/prediction_NN.csv  surrogate rollout per test scenario
//!   report.txt                   accuracy report (no timing)
//!   bench_report.txt             accuracy report with wall-clock timing
//! ```
//!
//! Errors map onto process exit codes: configuration and data problems are
//! exit 1, numerical failures exit 2, a missed accuracy threshold exit 3.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::RunConfig;
use crate::error::{ComputeError, ConfigError, DataError};
use crate::evaluate::{evaluate, write_report, EvalReport, Timing};
use crate::forcing::{
    canonical_corpus, generate_forcing, read_dataset, write_dataset, CorpusEntry, Dataset, Role,
};
use crate::integrator::simulate;
use crate::rom::{
    fit_autoencoder, fit_lstm, predict, AutoencoderParams, LstmRomParams, TrainLogEntry,
};
use crate::structure::assemble;

/// Environment variable overriding the configured output directory.
pub const OUT_DIR_ENV: &str = "MONOROM_OUT_DIR";

const MANIFEST_MAGIC: &str = "# monorom-manifest v1";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Validation(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Compute(#[from] ComputeError),
    #[error("aggregate NMSE {aggregate:.3}% exceeds the {threshold}% threshold")]
    Threshold { aggregate: f64, threshold: f64 },
}

impl PipelineError {
    /// Process exit code the CLI maps this error onto.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) | PipelineError::Data(_) => 1,
            PipelineError::Compute(_) => 2,
            PipelineError::Threshold { .. } => 3,
        }
    }
}

/// Configured output directory unless `MONOROM_OUT_DIR` overrides it.
pub fn resolve_output_dir(cfg: &RunConfig) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.output_dir.clone())
}

pub fn dataset_path(dir: &Path, scenario_id: usize) -> PathBuf {
    dir.join("datasets").join(format!("dataset_{scenario_id:02}.csv"))
}

pub fn prediction_path(dir: &Path, scenario_id: usize) -> PathBuf {
    dir.join("predictions").join(format!("prediction_{scenario_id:02}.csv"))
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.txt")
}

pub fn ae_weights_path(dir: &Path) -> PathBuf {
    dir.join("weights").join("autoencoder.txt")
}

pub fn rom_weights_path(dir: &Path) -> PathBuf {
    dir.join("weights").join("dynamics.txt")
}

pub fn ae_log_path(dir: &Path) -> PathBuf {
    dir.join("logs").join("ae_training.csv")
}

pub fn rom_log_path(dir: &Path) -> PathBuf {
    dir.join("logs").join("dynamics_training.csv")
}

pub fn report_path(dir: &Path) -> PathBuf {
    dir.join("report.txt")
}

pub fn bench_report_path(dir: &Path) -> PathBuf {
    dir.join("bench_report.txt")
}

fn ensure_parent(path: &Path) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| DataError::io(parent.display().to_string(), e))?;
    }
    Ok(())
}

/// Hex SHA-256 of a file's bytes, as recorded in the manifest.
pub fn sha256_hex(path: &Path) -> Result<String, DataError> {
    let bytes =
        std::fs::read(path).map_err(|e| DataError::io(path.display().to_string(), e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Hash the given files (paths relative to `dir`) into `manifest.txt`.
pub fn write_manifest(dir: &Path, rel_files: &[String]) -> Result<PathBuf, PipelineError> {
    let path = manifest_path(dir);
    ensure_parent(&path)?;
    let p = path.display().to_string();
    let file = std::fs::File::create(&path).map_err(|e| DataError::io(&p, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| PipelineError::Data(DataError::io(&p, e));
    writeln!(w, "{MANIFEST_MAGIC}").map_err(io)?;
    for rel in rel_files {
        let hash = sha256_hex(&dir.join(rel))?;
        writeln!(w, "{hash}  {rel}").map_err(io)?;
    }
    writeln!(w, "end").map_err(io)?;
    w.flush().map_err(io)?;
    Ok(path)
}

/// Re-hash every file listed in `manifest.txt`; any mismatch is an error.
/// Returns the verified relative paths.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>, PipelineError> {
    let path = manifest_path(dir);
    let p = path.display().to_string();
    let text =
        std::fs::read_to_string(&path).map_err(|e| DataError::io(&p, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(MANIFEST_MAGIC) {
        return Err(DataError::parse(&p, format!("expected `{MANIFEST_MAGIC}`")).into());
    }
    let mut files = Vec::new();
    let mut ended = false;
    for line in lines {
        if ended {
            return Err(DataError::parse(&p, "content after end marker").into());
        }
        if line == "end" {
            ended = true;
            continue;
        }
        let (hash, rel) = line.split_once("  ").ok_or_else(|| {
            DataError::parse(&p, format!("expected `<sha256>  <path>`, found `{line}`"))
        })?;
        let actual = sha256_hex(&dir.join(rel))?;
        if actual != hash {
            return Err(DataError::parse(
                &p,
                format!("checksum mismatch for `{rel}`: manifest {hash}, file {actual}"),
            )
            .into());
        }
        files.push(rel.to_string());
    }
    if !ended {
        return Err(DataError::parse(&p, "missing end marker").into());
    }
    Ok(files)
}

fn write_train_log(path: &Path, log: &[TrainLogEntry]) -> Result<(), PipelineError> {
    ensure_parent(path)?;
    let p = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| DataError::io(&p, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| PipelineError::Data(DataError::io(&p, e));
    writeln!(w, "epoch,train_loss,val_loss").map_err(io)?;
    for e in log {
        writeln!(w, "{},{},{}", e.epoch, e.train_loss, e.val_loss).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
    /// Total integrator wall-clock over all scenarios.
    pub fom_seconds: f64,
    pub newton_retries: usize,
}

/// What one generation worker returns per scenario: the dataset path, the
/// integrator wall-clock and its retry count.
type ScenarioOutcome = Result<(PathBuf, f64, usize), PipelineError>;

/// Simulate the whole scenario corpus and write one dataset per scenario,
/// plus a checksum manifest. `threads` > 1 spreads scenarios over that many
/// worker threads (the corpus is deterministic either way).
pub fn cmd_generate(cfg: &RunConfig, threads: usize) -> Result<GenerateSummary, PipelineError> {
    assert!(threads >= 1, "need at least one worker");
    let dir = resolve_output_dir(cfg);
    let model = assemble(&cfg.model)?;
    let corpus = canonical_corpus(
        cfg.master_seed,
        cfg.n_components,
        cfg.reference_rms,
        cfg.moment_arm,
    );
    for entry in &corpus {
        entry.spec.validate(cfg.forcing_dt, cfg.duration)?;
    }

    let work = |entry: &CorpusEntry| -> Result<(PathBuf, f64, usize), PipelineError> {
        let forcing = generate_forcing(
            &entry.spec,
            entry.scenario_id,
            entry.seed,
            cfg.forcing_dt,
            cfg.duration,
        )?;
        let response = simulate(&model, &forcing, &cfg.integrator)?;
        let wall = response.wall_seconds;
        let retries = response.newton_retries;
        let path = dataset_path(&dir, entry.scenario_id);
        ensure_parent(&path)?;
        write_dataset(
            &path,
            &Dataset {
                forcing,
                response,
                role: entry.role,
            },
        )?;
        Ok((path, wall, retries))
    };

    let mut results: Vec<Option<ScenarioOutcome>> = (0..corpus.len()).map(|_| None).collect();
    if threads == 1 {
        for (i, entry) in corpus.iter().enumerate() {
            results[i] = Some(work(entry));
        }
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads.min(corpus.len()))
                .map(|t| {
                    let corpus = &corpus;
                    let work = &work;
                    scope.spawn(move || {
                        (t..corpus.len())
                            .step_by(threads)
                            .map(|i| (i, work(&corpus[i])))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for handle in handles {
                for (i, r) in handle.join().expect("worker panicked") {
                    results[i] = Some(r);
                }
            }
        });
    }

    let mut files = Vec::with_capacity(corpus.len());
    let mut fom_seconds = 0.0;
    let mut newton_retries = 0;
    for r in results {
        let (path, wall, retries) = r.expect("every scenario ran")?;
        files.push(path);
        fom_seconds += wall;
        newton_retries += retries;
    }

    let rel: Vec<String> = corpus
        .iter()
        .map(|e| format!("datasets/dataset_{:02}.csv", e.scenario_id))
        .collect();
    let manifest = write_manifest(&dir, &rel)?;
    Ok(GenerateSummary {
        files,
        manifest,
        fom_seconds,
        newton_retries,
    })
}

/// Simulate a single scenario of the corpus and write its dataset.
pub fn cmd_simulate(cfg: &RunConfig, scenario_id: usize) -> Result<PathBuf, PipelineError> {
    let dir = resolve_output_dir(cfg);
    let corpus = canonical_corpus(
        cfg.master_seed,
        cfg.n_components,
        cfg.reference_rms,
        cfg.moment_arm,
    );
    let entry = corpus.get(scenario_id).ok_or_else(|| {
        ConfigError::invalid(
            "scenario",
            format!("scenario {scenario_id} does not exist; corpus has {}", corpus.len()),
        )
    })?;
    entry.spec.validate(cfg.forcing_dt, cfg.duration)?;
    let model = assemble(&cfg.model)?;
    let forcing = generate_forcing(
        &entry.spec,
        entry.scenario_id,
        entry.seed,
        cfg.forcing_dt,
        cfg.duration,
    )?;
    let response = simulate(&model, &forcing, &cfg.integrator)?;
    let path = dataset_path(&dir, scenario_id);
    ensure_parent(&path)?;
    write_dataset(
        &path,
        &Dataset {
            forcing,
            response,
            role: entry.role,
        },
    )?;
    Ok(path)
}

/// Read the stored corpus datasets for the given role, in scenario order.
fn read_corpus(cfg: &RunConfig, dir: &Path, role: Role) -> Result<Vec<Dataset>, PipelineError> {
    let corpus = canonical_corpus(
        cfg.master_seed,
        cfg.n_components,
        cfg.reference_rms,
        cfg.moment_arm,
    );
    let n_channels = 2 * (cfg.model.n_elements + 1);
    let mut out = Vec::new();
    for entry in corpus.iter().filter(|e| e.role == role) {
        let path = dataset_path(dir, entry.scenario_id);
        let ds = read_dataset(&path)?;
        if ds.forcing.dt != cfg.integrator.dt {
            return Err(ConfigError::DtMismatch {
                forcing_dt: ds.forcing.dt,
                integrator_dt: cfg.integrator.dt,
            }
            .into());
        }
        if ds.response.n_channels() != n_channels {
            return Err(DataError::parse(
                path.display().to_string(),
                format!(
                    "dataset has {} response channels but the configured pile has {n_channels}",
                    ds.response.n_channels()
                ),
            )
            .into());
        }
        out.push(ds);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub weights: PathBuf,
    pub log: PathBuf,
    pub epochs_run: usize,
    pub best_val_loss: f64,
    /// Latent-spread diagnostics; empty for the compression stage.
    pub latent_std: Vec<f64>,
    pub collapsed_latents: Vec<usize>,
}

/// Train the snapshot autoencoder on the stored training datasets.
pub fn cmd_train_ae(cfg: &RunConfig) -> Result<TrainSummary, PipelineError> {
    let dir = resolve_output_dir(cfg);
    let datasets = read_corpus(cfg, &dir, Role::Train)?;
    let records: Vec<_> = datasets.iter().map(|d| &d.response).collect();
    let (model, log) = fit_autoencoder(&records, cfg.latent_dim, &cfg.autoencoder)?;

    let weights = ae_weights_path(&dir);
    ensure_parent(&weights)?;
    model.save(&weights)?;
    let log_path = ae_log_path(&dir);
    write_train_log(&log_path, &log)?;
    Ok(TrainSummary {
        weights,
        log: log_path,
        epochs_run: log.len(),
        best_val_loss: log.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min),
        latent_std: Vec::new(),
        collapsed_latents: Vec::new(),
    })
}

/// Train the latent dynamics stage against the stored autoencoder.
pub fn cmd_train_rom(cfg: &RunConfig) -> Result<TrainSummary, PipelineError> {
    let dir = resolve_output_dir(cfg);
    let datasets = read_corpus(cfg, &dir, Role::Train)?;
    let ae = AutoencoderParams::load(&ae_weights_path(&dir))?;
    if ae.n_channels() != 2 * (cfg.model.n_elements + 1) {
        return Err(DataError::parse(
            ae_weights_path(&dir).display().to_string(),
            format!(
                "autoencoder expects {} channels but the configured pile has {}",
                ae.n_channels(),
                2 * (cfg.model.n_elements + 1)
            ),
        )
        .into());
    }
    let refs: Vec<_> = datasets.iter().collect();
    let (model, log, diag) = fit_lstm(&ae, &refs, cfg.hidden_size, &cfg.dynamics)?;

    let weights = rom_weights_path(&dir);
    ensure_parent(&weights)?;
    model.save(&weights)?;
    let log_path = rom_log_path(&dir);
    write_train_log(&log_path, &log)?;
    Ok(TrainSummary {
        weights,
        log: log_path,
        epochs_run: log.len(),
        best_val_loss: log.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min),
        latent_std: diag.latent_std,
        collapsed_latents: diag.collapsed_latents,
    })
}

/// Both training stages in order.
pub fn cmd_train(cfg: &RunConfig) -> Result<(TrainSummary, TrainSummary), PipelineError> {
    let ae = cmd_train_ae(cfg)?;
    let rom = cmd_train_rom(cfg)?;
    Ok((ae, rom))
}

#[derive(Debug, Clone)]
pub struct PredictSummary {
    pub files: Vec<PathBuf>,
    /// Total rollout wall-clock over all test scenarios.
    pub rom_seconds: f64,
}

/// Free-running surrogate rollout over every test scenario; predictions are
/// written in the dataset format (stored loads plus predicted response).
pub fn cmd_predict(cfg: &RunConfig) -> Result<PredictSummary, PipelineError> {
    let dir = resolve_output_dir(cfg);
    let ae = AutoencoderParams::load(&ae_weights_path(&dir))?;
    let rom = LstmRomParams::load(&rom_weights_path(&dir))?;
    let datasets = read_corpus(cfg, &dir, Role::Test)?;

    let mut files = Vec::new();
    let mut rom_seconds = 0.0;
    for ds in datasets {
        let scenario_id = ds.forcing.scenario_id;
        let result = predict(&ae, &rom, &ds.forcing)?;
        rom_seconds += result.wall_seconds;
        let path = prediction_path(&dir, scenario_id);
        ensure_parent(&path)?;
        write_dataset(
            &path,
            &Dataset {
                forcing: ds.forcing,
                response: result,
                role: ds.role,
            },
        )?;
        files.push(path);
    }
    Ok(PredictSummary { files, rom_seconds })
}

#[derive(Debug, Clone)]
pub struct EvaluateSummary {
    pub report: PathBuf,
    pub aggregate_nmse: f64,
    pub transient_aggregate_nmse: f64,
}

fn compare_against_truth(
    cfg: &RunConfig,
    dir: &Path,
    scenario_id: usize,
) -> Result<(Dataset, Dataset, EvalReport), PipelineError> {
    let truth_path = dataset_path(dir, scenario_id);
    let pred_path = prediction_path(dir, scenario_id);
    let truth = read_dataset(&truth_path)?;
    let pred = read_dataset(&pred_path)?;
    if truth.response.dt != pred.response.dt {
        return Err(ConfigError::DtMismatch {
            forcing_dt: pred.response.dt,
            integrator_dt: truth.response.dt,
        }
        .into());
    }
    if truth.response.data.shape() != pred.response.data.shape() {
        return Err(DataError::parse(
            pred_path.display().to_string(),
            format!(
                "prediction shape {:?} does not match truth {:?}",
                pred.response.data.shape(),
                truth.response.data.shape()
            ),
        )
        .into());
    }
    let report = evaluate(&truth.response, &pred.response, &cfg.evaluate)?;
    Ok((truth, pred, report))
}

/// Score the stored prediction of the test scenario against its dataset and
/// write `report.txt`. Exceeding the configured NMSE threshold is an error
/// (the report is still written first).
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvaluateSummary, PipelineError> {
    let dir = resolve_output_dir(cfg);
    let corpus = canonical_corpus(
        cfg.master_seed,
        cfg.n_components,
        cfg.reference_rms,
        cfg.moment_arm,
    );
    let test_id = corpus
        .iter()
        .find(|e| e.role == Role::Test)
        .expect("corpus always has a test scenario")
        .scenario_id;
    let (_, _, report) = compare_against_truth(cfg, &dir, test_id)?;
    let path = report_path(&dir);
    ensure_parent(&path)?;
    write_report(&path, &report)?;
    if report.aggregate_nmse > cfg.nmse_threshold {
        return Err(PipelineError::Threshold {
            aggregate: report.aggregate_nmse,
            threshold: cfg.nmse_threshold,
        });
    }
    Ok(EvaluateSummary {
        report: path,
        aggregate_nmse: report.aggregate_nmse,
        transient_aggregate_nmse: report.transient_aggregate_nmse,
    })
}

#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub report: PathBuf,
    pub timing: Timing,
    pub aggregate_nmse: f64,
}

/// Time the simulator against the surrogate on the test scenario and write
/// `bench_report.txt` (the accuracy report plus timing keys). Accuracy is
/// measured against the stored dataset; the fresh simulation only provides
/// the wall clock.
pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchSummary, PipelineError> {
    let dir = resolve_output_dir(cfg);
    let corpus = canonical_corpus(
        cfg.master_seed,
        cfg.n_components,
        cfg.reference_rms,
        cfg.moment_arm,
    );
    let test_id = corpus
        .iter()
        .find(|e| e.role == Role::Test)
        .expect("corpus always has a test scenario")
        .scenario_id;
    let (truth, _, mut report) = compare_against_truth(cfg, &dir, test_id)?;

    let model = assemble(&cfg.model)?;
    let ae = AutoencoderParams::load(&ae_weights_path(&dir))?;
    let rom = LstmRomParams::load(&rom_weights_path(&dir))?;
    let fom = simulate(&model, &truth.forcing, &cfg.integrator)?;
    let surrogate = predict(&ae, &rom, &truth.forcing)?;
    let timing = Timing {
        fom_seconds: fom.wall_seconds,
        rom_seconds: surrogate.wall_seconds,
        speedup: fom.wall_seconds / surrogate.wall_seconds,
    };
    report.timing = Some(timing);

    let path = bench_report_path(&dir);
    ensure_parent(&path)?;
    write_report(&path, &report)?;
    Ok(BenchSummary {
        report: path,
        timing,
        aggregate_nmse: report.aggregate_nmse,
    })
}
