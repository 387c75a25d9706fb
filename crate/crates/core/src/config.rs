//! Run configuration: one INI-style file drives every subcommand.
//!
//! The format is deliberately small: `[section]` headers, `key = value`
//! pairs, and full-line comments starting with `#` or `;`. Every key has a
//! default, so the empty file is a complete configuration (the reference
//! setup). Unknown sections, unknown keys and duplicate assignments are
//! hard errors - a typo must never silently fall back to a default.
//!
//! `CONFIG_KEYS` is the single schema: the parser validates against it and
//! the CLI renders it as help text, so the two cannot drift apart.

use std::collections::HashMap;
use std::path::PathBuf;

use crate::error::ConfigError;
use crate::evaluate::{default_spectrum_channels, EvalConfig};
use crate::forcing::{derive_seed, PRODUCTION_BAND};
use crate::integrator::IntegratorConfig;
use crate::rom::{AeTrainConfig, LstmTrainConfig};
use crate::soil::SoilProfile;
use crate::structure::{ModelConfig, PileSection};

/// Seed stream tag for autoencoder training.
const AE_TRAIN_STREAM: u64 = 0x4145;
/// Seed stream tag for latent-dynamics training.
const DYN_TRAIN_STREAM: u64 = 0x4459;

/// One schema entry: where the key lives, its default, and help text.
#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub section: &'static str,
    pub key: &'static str,
    pub default: &'static str,
    pub units: &'static str,
    pub help: &'static str,
}

pub const CONFIG_KEYS: &[KeySpec] = &[
    KeySpec { section: "run", key: "master_seed", default: "42", units: "-", help: "root seed; every random stream derives from it" },
    KeySpec { section: "run", key: "output_dir", default: "out", units: "-", help: "directory for datasets, weights and reports" },
    KeySpec { section: "soil", key: "unit_weight", default: "10e3", units: "N/m^3", help: "submerged unit weight of the sand" },
    KeySpec { section: "soil", key: "friction_angle", default: "35", units: "deg", help: "internal friction angle" },
    KeySpec { section: "soil", key: "initial_modulus", default: "22e6", units: "N/m^3", help: "initial modulus of subgrade reaction" },
    KeySpec { section: "soil", key: "loading_factor", default: "0.9", units: "-", help: "static loading factor on the ultimate resistance" },
    KeySpec { section: "structure", key: "n_elements", default: "30", units: "-", help: "number of beam elements over the embedded length" },
    KeySpec { section: "structure", key: "element_length", default: "1.0", units: "m", help: "length of one beam element" },
    KeySpec { section: "structure", key: "outer_diameter", default: "9.5", units: "m", help: "pile outer diameter" },
    KeySpec { section: "structure", key: "wall_thickness", default: "0.08", units: "m", help: "pile wall thickness" },
    KeySpec { section: "structure", key: "youngs_modulus", default: "210e9", units: "Pa", help: "steel Young's modulus" },
    KeySpec { section: "structure", key: "density", default: "7850", units: "kg/m^3", help: "steel density" },
    KeySpec { section: "structure", key: "damping_ratio", default: "0.02", units: "-", help: "Rayleigh damping ratio at the first two modes" },
    KeySpec { section: "integrator", key: "dt", default: "0.02", units: "s", help: "time step of the implicit integrator" },
    KeySpec { section: "integrator", key: "newton_tol", default: "1e-8", units: "-", help: "relative residual tolerance per step" },
    KeySpec { section: "integrator", key: "newton_max_iter", default: "25", units: "-", help: "Newton iteration cap per step" },
    KeySpec { section: "forcing", key: "dt", default: "0.02", units: "s", help: "sample step of generated load records" },
    KeySpec { section: "forcing", key: "duration", default: "500", units: "s", help: "length of every load record" },
    KeySpec { section: "forcing", key: "n_components", default: "25", units: "-", help: "sinusoid components per load channel" },
    KeySpec { section: "forcing", key: "reference_rms", default: "1e6", units: "N", help: "force RMS at amplitude scale 1" },
    KeySpec { section: "forcing", key: "moment_arm", default: "30", units: "m", help: "lever arm converting force RMS to moment RMS" },
    KeySpec { section: "autoencoder", key: "latent_dim", default: "4", units: "-", help: "latent coordinates of the compressed snapshot" },
    KeySpec { section: "autoencoder", key: "epochs", default: "200", units: "-", help: "training epoch cap" },
    KeySpec { section: "autoencoder", key: "batch_size", default: "256", units: "-", help: "snapshots per gradient step" },
    KeySpec { section: "autoencoder", key: "learning_rate", default: "1e-3", units: "-", help: "Adam learning rate" },
    KeySpec { section: "autoencoder", key: "patience", default: "15", units: "-", help: "epochs without validation improvement before stopping" },
    KeySpec { section: "dynamics", key: "hidden_size", default: "45", units: "-", help: "LSTM hidden units" },
    KeySpec { section: "dynamics", key: "epochs", default: "300", units: "-", help: "training epoch cap" },
    KeySpec { section: "dynamics", key: "truncation", default: "100", units: "steps", help: "window length and backward-pass truncation" },
    KeySpec { section: "dynamics", key: "batch_size", default: "32", units: "-", help: "windows per gradient step" },
    KeySpec { section: "dynamics", key: "batches_per_epoch", default: "24", units: "-", help: "gradient steps per epoch" },
    KeySpec { section: "dynamics", key: "learning_rate", default: "1e-3", units: "-", help: "Adam learning rate" },
    KeySpec { section: "dynamics", key: "patience", default: "20", units: "-", help: "epochs without validation improvement before stopping" },
    KeySpec { section: "evaluate", key: "steady_start", default: "100", units: "s", help: "start of the steady accuracy window" },
    KeySpec { section: "evaluate", key: "transient_end", default: "50", units: "s", help: "end of the transient accuracy window" },
    KeySpec { section: "evaluate", key: "spectrum_segment", default: "4096", units: "samples", help: "Welch segment length" },
    KeySpec { section: "evaluate", key: "nmse_threshold", default: "5.0", units: "%", help: "aggregate NMSE above this fails the evaluate command" },
];

fn known_section(section: &str) -> bool {
    CONFIG_KEYS.iter().any(|k| k.section == section)
}

fn key_spec(section: &str, key: &str) -> Option<&'static KeySpec> {
    CONFIG_KEYS
        .iter()
        .find(|k| k.section == section && k.key == key)
}

/// Raw `section.key -> (line, value)` map, schema-checked but untyped.
struct RawConfig {
    values: HashMap<(String, String), (usize, String)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = HashMap::new();
        let mut section: Option<String> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let l = raw_line.trim();
            if l.is_empty() || l.starts_with('#') || l.starts_with(';') {
                continue;
            }
            if let Some(inner) = l.strip_prefix('[') {
                let name = inner.strip_suffix(']').ok_or(ConfigError::Malformed {
                    line,
                    reason: format!("unterminated section header `{l}`"),
                })?;
                if !known_section(name) {
                    return Err(ConfigError::UnknownSection {
                        section: name.to_string(),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = l.split_once('=').ok_or(ConfigError::Malformed {
                line,
                reason: format!("expected `[section]` or `key = value`, found `{l}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let section = section.clone().ok_or(ConfigError::Malformed {
                line,
                reason: format!("key `{key}` appears before any [section] header"),
            })?;
            if key_spec(&section, key).is_none() {
                return Err(ConfigError::UnknownKey {
                    section,
                    key: key.to_string(),
                });
            }
            if let Some((prev_line, _)) = values.insert(
                (section.clone(), key.to_string()),
                (line, value.to_string()),
            ) {
                let _ = prev_line;
                return Err(ConfigError::DuplicateKey {
                    line,
                    section,
                    key: key.to_string(),
                });
            }
        }
        Ok(RawConfig { values })
    }

    /// Value with its source line, falling back to the schema default.
    fn value_of(&self, section: &str, key: &str) -> (usize, &str) {
        let spec = key_spec(section, key).expect("key must be in CONFIG_KEYS");
        match self.values.get(&(section.to_string(), key.to_string())) {
            Some((line, v)) => (*line, v.as_str()),
            None => (0, spec.default),
        }
    }

    fn get_f64(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        let (line, v) = self.value_of(section, key);
        v.parse::<f64>().map_err(|_| ConfigError::Malformed {
            line,
            reason: format!("{section}.{key}: expected a number, got `{v}`"),
        })
    }

    fn get_u64(&self, section: &str, key: &str) -> Result<u64, ConfigError> {
        let (line, v) = self.value_of(section, key);
        v.parse::<u64>().map_err(|_| ConfigError::Malformed {
            line,
            reason: format!("{section}.{key}: expected a non-negative integer, got `{v}`"),
        })
    }

    fn get_usize(&self, section: &str, key: &str) -> Result<usize, ConfigError> {
        let (line, v) = self.value_of(section, key);
        v.parse::<usize>().map_err(|_| ConfigError::Malformed {
            line,
            reason: format!("{section}.{key}: expected a non-negative integer, got `{v}`"),
        })
    }

    fn get_string(&self, section: &str, key: &str) -> String {
        self.value_of(section, key).1.to_string()
    }
}

/// Fully typed, validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub integrator: IntegratorConfig,
    /// Sample step of generated load records; must equal the integrator dt.
    pub forcing_dt: f64,
    pub duration: f64,
    pub n_components: usize,
    pub reference_rms: f64,
    pub moment_arm: f64,
    pub latent_dim: usize,
    pub autoencoder: AeTrainConfig,
    pub hidden_size: usize,
    pub dynamics: LstmTrainConfig,
    pub evaluate: EvalConfig,
    pub nmse_threshold: f64,
}

impl RunConfig {
    /// Parse and validate a configuration text; the empty string yields the
    /// reference setup.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw = RawConfig::parse(text)?;

        let master_seed = raw.get_u64("run", "master_seed")?;
        let section = PileSection::new(
            raw.get_f64("structure", "outer_diameter")?,
            raw.get_f64("structure", "wall_thickness")?,
            raw.get_f64("structure", "youngs_modulus")?,
            raw.get_f64("structure", "density")?,
        )?;
        let soil = SoilProfile::new(
            raw.get_f64("soil", "unit_weight")?,
            raw.get_f64("soil", "friction_angle")?,
            raw.get_f64("soil", "initial_modulus")?,
            section.outer_diameter,
            raw.get_f64("soil", "loading_factor")?,
        )?;
        let model = ModelConfig {
            n_elements: raw.get_usize("structure", "n_elements")?,
            element_length: raw.get_f64("structure", "element_length")?,
            section,
            soil,
            damping_ratio: raw.get_f64("structure", "damping_ratio")?,
            damping_modes: (1, 2),
        };
        let integrator = IntegratorConfig {
            dt: raw.get_f64("integrator", "dt")?,
            newton_tol: raw.get_f64("integrator", "newton_tol")?,
            newton_max_iter: raw.get_usize("integrator", "newton_max_iter")?,
            ..IntegratorConfig::default()
        };
        let autoencoder = AeTrainConfig {
            epochs: raw.get_usize("autoencoder", "epochs")?,
            batch_size: raw.get_usize("autoencoder", "batch_size")?,
            learning_rate: raw.get_f64("autoencoder", "learning_rate")?,
            patience: raw.get_usize("autoencoder", "patience")?,
            seed: derive_seed(master_seed, AE_TRAIN_STREAM, 0),
        };
        let dynamics = LstmTrainConfig {
            epochs: raw.get_usize("dynamics", "epochs")?,
            truncation: raw.get_usize("dynamics", "truncation")?,
            batch_size: raw.get_usize("dynamics", "batch_size")?,
            batches_per_epoch: raw.get_usize("dynamics", "batches_per_epoch")?,
            learning_rate: raw.get_f64("dynamics", "learning_rate")?,
            patience: raw.get_usize("dynamics", "patience")?,
            seed: derive_seed(master_seed, DYN_TRAIN_STREAM, 0),
        };
        let evaluate = EvalConfig {
            steady_start: raw.get_f64("evaluate", "steady_start")?,
            transient_end: raw.get_f64("evaluate", "transient_end")?,
            spectrum_segment: raw.get_usize("evaluate", "spectrum_segment")?,
            spectrum_channels: default_spectrum_channels(model.n_elements + 1),
        };

        let cfg = RunConfig {
            master_seed,
            output_dir: PathBuf::from(raw.get_string("run", "output_dir")),
            model,
            integrator,
            forcing_dt: raw.get_f64("forcing", "dt")?,
            duration: raw.get_f64("forcing", "duration")?,
            n_components: raw.get_usize("forcing", "n_components")?,
            reference_rms: raw.get_f64("forcing", "reference_rms")?,
            moment_arm: raw.get_f64("forcing", "moment_arm")?,
            latent_dim: raw.get_usize("autoencoder", "latent_dim")?,
            autoencoder,
            hidden_size: raw.get_usize("dynamics", "hidden_size")?,
            dynamics,
            evaluate,
            nmse_threshold: raw.get_f64("evaluate", "nmse_threshold")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.integrator.validate()?;
        self.autoencoder.validate()?;
        self.dynamics.validate()?;

        if self.forcing_dt != self.integrator.dt {
            return Err(ConfigError::DtMismatch {
                forcing_dt: self.forcing_dt,
                integrator_dt: self.integrator.dt,
            });
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(ConfigError::invalid(
                "duration",
                format!("must be positive and finite, got {}", self.duration),
            ));
        }
        if self.duration < 2.0 * self.forcing_dt {
            return Err(ConfigError::invalid(
                "duration",
                "must cover at least two sample steps",
            ));
        }
        // The production band must sit below Nyquist or generation is
        // ill-posed.
        if PRODUCTION_BAND.1 >= 0.5 / self.forcing_dt {
            return Err(ConfigError::invalid(
                "dt",
                format!(
                    "Nyquist {} Hz does not cover the {} Hz production band",
                    0.5 / self.forcing_dt,
                    PRODUCTION_BAND.1
                ),
            ));
        }
        if self.n_components == 0 {
            return Err(ConfigError::invalid("n_components", "must be at least 1"));
        }
        if !(self.reference_rms > 0.0) || !self.reference_rms.is_finite() {
            return Err(ConfigError::invalid(
                "reference_rms",
                format!("must be positive and finite, got {}", self.reference_rms),
            ));
        }
        if !(self.moment_arm > 0.0) || !self.moment_arm.is_finite() {
            return Err(ConfigError::invalid(
                "moment_arm",
                format!("must be positive and finite, got {}", self.moment_arm),
            ));
        }
        if self.latent_dim == 0 {
            return Err(ConfigError::invalid("latent_dim", "must be at least 1"));
        }
        if self.hidden_size == 0 {
            return Err(ConfigError::invalid("hidden_size", "must be at least 1"));
        }
        if !(self.nmse_threshold > 0.0) || !self.nmse_threshold.is_finite() {
            return Err(ConfigError::invalid(
                "nmse_threshold",
                format!("must be positive and finite, got {}", self.nmse_threshold),
            ));
        }

        let ev = &self.evaluate;
        if !(ev.steady_start >= 0.0) || ev.steady_start >= self.duration {
            return Err(ConfigError::invalid(
                "steady_start",
                format!(
                    "must lie inside the record, got {} of {} s",
                    ev.steady_start, self.duration
                ),
            ));
        }
        if !(ev.transient_end > 0.0) || !ev.transient_end.is_finite() {
            return Err(ConfigError::invalid(
                "transient_end",
                format!("must be positive and finite, got {}", ev.transient_end),
            ));
        }
        if ev.spectrum_segment < 4 || !ev.spectrum_segment.is_multiple_of(2) {
            return Err(ConfigError::invalid(
                "spectrum_segment",
                format!("must be even and at least 4, got {}", ev.spectrum_segment),
            ));
        }
        let steady_samples =
            ((self.duration - ev.steady_start) / self.forcing_dt).floor() as usize + 1;
        if steady_samples < ev.spectrum_segment {
            return Err(ConfigError::invalid(
                "spectrum_segment",
                format!(
                    "steady window holds only {steady_samples} samples, need {}",
                    ev.spectrum_segment
                ),
            ));
        }
        Ok(())
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::parse("").expect("schema defaults must be valid")
    }
}
