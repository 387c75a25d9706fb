//! Reduced-order model: autoencoder compression plus latent LSTM dynamics.
//!
//! The full-order response snapshot (all translational channels at one
//! instant) is compressed by an autoencoder to a few latent coordinates; an
//! LSTM advances those coordinates one sample at a time, driven by the
//! normalized head loads and its own previous latent output. `predict`
//! composes the two into a free-running surrogate of the simulator: after a
//! zero-snapshot initialization the latent feedback is the network's own
//! prediction, never ground truth.

pub mod autoencoder;
pub mod lstm_rom;

pub use autoencoder::{fit_autoencoder, AeTrainConfig, AutoencoderParams};
pub use lstm_rom::{fit_lstm, rom_input, LstmFitDiagnostics, LstmRomParams, LstmTrainConfig};

use nalgebra::{DMatrix, DVector};

use crate::error::ComputeError;
use crate::forcing::ForcingRecord;
use crate::integrator::SimulationResult;

/// Per-channel affine standardization x -> (x - mean) / std.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
}

impl Normalization {
    /// No-op standardization (mean 0, std 1).
    pub fn identity(n: usize) -> Self {
        Normalization {
            mean: DVector::zeros(n),
            std: DVector::from_element(n, 1.0),
        }
    }

    /// Fit per-channel statistics over the rows of the given matrices
    /// (rows are samples, columns are channels). A channel whose standard
    /// deviation is indistinguishable from zero is an error, labeled with
    /// `labels[channel]`.
    pub fn fit(mats: &[&DMatrix<f64>], labels: &[String]) -> Result<Self, ComputeError> {
        assert!(!mats.is_empty(), "no data to fit normalization");
        let n_ch = mats[0].ncols();
        assert!(
            mats.iter().all(|m| m.ncols() == n_ch),
            "inconsistent channel counts"
        );
        assert_eq!(labels.len(), n_ch, "one label per channel");
        let total: usize = mats.iter().map(|m| m.nrows()).sum();

        let mut mean = DVector::zeros(n_ch);
        for m in mats {
            for c in 0..n_ch {
                mean[c] += m.column(c).sum();
            }
        }
        mean /= total as f64;

        let mut var = DVector::zeros(n_ch);
        for m in mats {
            for c in 0..n_ch {
                var[c] += m.column(c).iter().map(|v| (v - mean[c]).powi(2)).sum::<f64>();
            }
        }
        var /= total as f64;

        let std = var.map(f64::sqrt);
        for c in 0..n_ch {
            // Anything at roundoff scale relative to the mean is a constant
            // channel; standardizing it would divide by (near) zero.
            if std[c] <= 1e-14 * (1.0 + mean[c].abs()) {
                return Err(ComputeError::DegenerateChannel {
                    channel: labels[c].clone(),
                });
            }
        }
        Ok(Normalization { mean, std })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.len() == 0
    }

    /// Standardize columns of a channels x N matrix.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for mut col in out.column_iter_mut() {
            col -= &self.mean;
            col.component_div_assign(&self.std);
        }
        out
    }

    /// Undo `apply` on columns of a channels x N matrix.
    pub fn invert(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = z.clone();
        for mut col in out.column_iter_mut() {
            col.component_mul_assign(&self.std);
            col += &self.mean;
        }
        out
    }

    pub fn apply_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        (x - &self.mean).component_div(&self.std)
    }

    pub fn invert_vec(&self, z: &DVector<f64>) -> DVector<f64> {
        z.component_mul(&self.std) + &self.mean
    }
}

/// One line of a training history: epoch number and both losses in the
/// network's normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLogEntry {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Free-running surrogate rollout, returning the reconstructed response and
/// the latent trajectory (latent x T).
pub fn predict_with_latents(
    ae: &AutoencoderParams,
    rom: &LstmRomParams,
    forcing: &ForcingRecord,
) -> Result<(SimulationResult, DMatrix<f64>), ComputeError> {
    let t_len = forcing.n_samples();
    assert!(t_len > 0, "empty forcing record");
    let latent_dim = ae.latent_dim();
    assert_eq!(
        rom.network.head.out_dim(),
        latent_dim,
        "latent dimensions of autoencoder and dynamics model disagree"
    );
    assert_eq!(
        rom.network.cell.input_size,
        4 + latent_dim,
        "dynamics model input must be the four loads plus the latent state"
    );

    let start = std::time::Instant::now();

    // Normalized forcing, channels x T.
    let f_norm = rom.forcing_norm.apply(&forcing.data.transpose());

    // The latent image of the quiescent structure anchors the rollout.
    let z0 = ae.encode(&DVector::zeros(ae.n_channels()));

    let hs = rom.network.cell.hidden_size;
    let mut h = DVector::zeros(hs);
    let mut c = DVector::zeros(hs);
    let mut z_prev = z0.clone();
    let mut latents = DMatrix::zeros(latent_dim, t_len);
    latents.set_column(0, &z0);

    let mut x = DVector::zeros(4 + latent_dim);
    for t in 1..t_len {
        for k in 0..4 {
            x[k] = f_norm[(k, t)];
        }
        for k in 0..latent_dim {
            x[4 + k] = z_prev[k];
        }
        let (h_new, c_new) = rom.network.cell.step(&x, &h, &c);
        let z = rom.network.head.forward(&h_new);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(ComputeError::RolloutDiverged { step: t });
        }
        latents.set_column(t, &z);
        z_prev = z;
        h = h_new;
        c = c_new;
    }

    // Decode the whole latent trajectory in one batch.
    let decoded = ae.decode_batch(&latents); // channels x T
    let wall_seconds = start.elapsed().as_secs_f64();

    Ok((
        SimulationResult {
            dt: forcing.dt,
            data: decoded.transpose(),
            wall_seconds,
            newton_retries: 0,
        },
        latents,
    ))
}

/// Free-running surrogate rollout; see `predict_with_latents`.
pub fn predict(
    ae: &AutoencoderParams,
    rom: &LstmRomParams,
    forcing: &ForcingRecord,
) -> Result<SimulationResult, ComputeError> {
    predict_with_latents(ae, rom, forcing).map(|(r, _)| r)
}
