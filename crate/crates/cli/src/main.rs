//! `monorom`: the pipeline driver. Every subcommand reads one INI
//! configuration file (defaults apply when none is given) and works inside
//! the configured output directory, overridable with MONOROM_OUT_DIR.
//!
//! Exit codes: 0 success, 1 configuration or data error, 2 numerical
//! failure, 3 accuracy threshold exceeded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use monorom_core::config::{RunConfig, CONFIG_KEYS};
use monorom_core::error::DataError;
use monorom_core::pipeline::{
    cmd_bench, cmd_evaluate, cmd_generate, cmd_predict, cmd_simulate, cmd_train, cmd_train_ae,
    cmd_train_rom, resolve_output_dir, PipelineError, TrainSummary,
};

#[derive(Parser)]
#[command(
    name = "monorom",
    version,
    about = "Data-driven surrogate pipeline for a laterally loaded monopile",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    /// INI run configuration; every key is optional (see --help footer).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the whole scenario corpus; writes datasets and a manifest.
    Generate {
        /// Worker threads across scenarios; any value gives identical bytes.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Simulate a single scenario of the corpus.
    Simulate {
        /// Scenario id, 0-11 in the reference corpus.
        #[arg(long)]
        scenario: usize,
    },
    /// Train the snapshot autoencoder on the stored training datasets.
    TrainAe,
    /// Train the latent dynamics network against the stored autoencoder.
    TrainRom,
    /// Both training stages in order.
    Train,
    /// Free-running surrogate rollout over the held-out scenario.
    Predict,
    /// Score the stored prediction; fails if NMSE exceeds the threshold.
    Evaluate,
    /// Time the simulator against the surrogate and write a timing report.
    Bench,
}

/// Reference table of every configuration key, shown under --help.
fn config_reference() -> String {
    let mut out = String::from("Configuration keys (INI `[section]` + `key = value`; all optional):\n");
    let mut section = "";
    for k in CONFIG_KEYS {
        if k.section != section {
            section = k.section;
            out.push_str(&format!("\n  [{section}]\n"));
        }
        let units = if k.units.is_empty() {
            String::new()
        } else {
            format!(" ({})", k.units)
        };
        out.push_str(&format!(
            "    {:<22} default {:<10} {}{}\n",
            k.key, k.default, k.help, units
        ));
    }
    out
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, PipelineError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| DataError::io(p.display().to_string(), e))?,
        None => String::new(),
    };
    Ok(RunConfig::parse(&text)?)
}

fn report_training(stage: &str, s: &TrainSummary) {
    println!(
        "{stage}: {} epochs, best val loss {:.6e} -> {}",
        s.epochs_run,
        s.best_val_loss,
        s.weights.display()
    );
    if !s.collapsed_latents.is_empty() {
        eprintln!(
            "warning: latent channels with near-zero spread: {:?}",
            s.collapsed_latents
        );
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let cfg = load_config(cli.config.as_ref())?;
    let dir = resolve_output_dir(&cfg);
    match cli.command {
        Command::Generate { threads } => {
            if threads == 0 {
                return Err(monorom_core::error::ConfigError::invalid(
                    "threads",
                    "must be at least 1",
                )
                .into());
            }
            let s = cmd_generate(&cfg, threads)?;
            println!(
                "wrote {} datasets under {} (integrator {:.1} s, {} retries)",
                s.files.len(),
                dir.display(),
                s.fom_seconds,
                s.newton_retries
            );
            println!("manifest: {}", s.manifest.display());
        }
        Command::Simulate { scenario } => {
            let path = cmd_simulate(&cfg, scenario)?;
            println!("wrote {}", path.display());
        }
        Command::TrainAe => report_training("autoencoder", &cmd_train_ae(&cfg)?),
        Command::TrainRom => report_training("dynamics", &cmd_train_rom(&cfg)?),
        Command::Train => {
            let (ae, rom) = cmd_train(&cfg)?;
            report_training("autoencoder", &ae);
            report_training("dynamics", &rom);
        }
        Command::Predict => {
            let s = cmd_predict(&cfg)?;
            for f in &s.files {
                println!("wrote {}", f.display());
            }
            println!("rollout {:.3} s", s.rom_seconds);
        }
        Command::Evaluate => {
            let s = cmd_evaluate(&cfg)?;
            println!(
                "aggregate steady NMSE {:.3}% (transient {:.3}%) -> {}",
                s.aggregate_nmse,
                s.transient_aggregate_nmse,
                s.report.display()
            );
        }
        Command::Bench => {
            let s = cmd_bench(&cfg)?;
            println!(
                "FOM {:.2} s, ROM {:.3} s, speedup {:.1}x, aggregate NMSE {:.3}% -> {}",
                s.timing.fom_seconds,
                s.timing.rom_seconds,
                s.timing.speedup,
                s.aggregate_nmse,
                s.report.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = Cli::command()
        .after_help(config_reference())
        .get_matches();
    let cli = Cli::from_arg_matches(&matches).expect("parsed by the same definition");
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
