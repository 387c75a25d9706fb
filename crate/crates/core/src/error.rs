//! Error taxonomy for the crate, split by failure class.
//!
//! `ConfigError` covers everything a user can get wrong before any number is
//! crunched: bad geometry, bad soil parameters, malformed run configuration.
//! `ComputeError` covers failures inside a simulation, training run, or
//! metric evaluation. `DataError` covers unreadable or malformed files on
//! disk. The CLI maps these onto distinct process exit codes.

use thiserror::Error;

/// Invalid user-supplied parameter or configuration value.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// A named parameter violated its documented range or structure.
    #[error("invalid {name}: {reason}")]
    Invalid { name: &'static str, reason: String },

    /// Config file contains a key the schema does not define.
    #[error("unknown config key `{key}` in section [{section}]")]
    UnknownKey { section: String, key: String },

    /// Config file contains a section the schema does not define.
    #[error("unknown config section [{section}]")]
    UnknownSection { section: String },

    /// Config file line that is neither a section header, a comment, nor a
    /// `key = value` pair.
    #[error("config line {line}: {reason}")]
    Malformed { line: usize, reason: String },

    /// The same key was assigned twice in one file.
    #[error("config line {line}: duplicate key `{key}` in section [{section}]")]
    DuplicateKey {
        line: usize,
        section: String,
        key: String,
    },

    /// Forcing records and the integrator must share one sample step.
    #[error("forcing dt {forcing_dt} s does not match integrator dt {integrator_dt} s")]
    DtMismatch { forcing_dt: f64, integrator_dt: f64 },
}

impl ConfigError {
    /// Shorthand for the common "named value out of range" case.
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            name,
            reason: reason.into(),
        }
    }
}

/// Failure inside a numerical computation: time stepping, training, metrics.
#[derive(Debug, Error)]
pub enum ComputeError {
    /// Newton failed to reach the residual tolerance within the iteration cap.
    #[error(
        "Newton did not converge at t = {t:.6} s: residual {residual:.3e} after {iterations} iterations"
    )]
    NewtonDiverged {
        t: f64,
        iterations: usize,
        residual: f64,
    },

    /// A free-running rollout produced a non-finite state.
    #[error("rollout state became non-finite at step {step}")]
    RolloutDiverged { step: usize },

    /// Standardization is undefined for a constant channel.
    #[error("channel {channel} has zero variance; standardization is undefined")]
    DegenerateChannel { channel: String },

    /// Rayleigh coefficients need two distinct anchor frequencies.
    #[error("anchor modes share frequency {omega:.6e} rad/s; Rayleigh fit needs distinct modes")]
    RepeatedFrequency { omega: f64 },

    /// NMSE against a constant truth signal is undefined.
    #[error("truth window has zero variance; NMSE is undefined")]
    UndefinedMetric,

    /// Welch estimation needs at least one full segment.
    #[error("series too short for spectrum: {len} samples, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },

    /// Training produced a non-finite loss (exploded gradients or bad data).
    #[error("training loss became non-finite at epoch {epoch}")]
    TrainingDiverged { epoch: usize },
}

/// Unreadable or malformed file content.
#[derive(Debug, Error)]
pub enum DataError {
    /// The file exists but its content violates the format.
    #[error("{path}: {reason}")]
    Parse { path: String, reason: String },

    /// Underlying I/O failure, tagged with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DataError {
    pub fn parse(path: impl Into<String>, reason: impl Into<String>) -> Self {
        DataError::Parse {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}
