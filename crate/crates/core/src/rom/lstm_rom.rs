//! Latent dynamics model: an LSTM that advances the autoencoder's latent
//! coordinates one sample at a time.
//!
//! The input at step t is the standardized head load at t concatenated with
//! the latent state at t-1; the target is the latent state at t. Training is
//! teacher-forced (the previous latent comes from the encoded reference
//! response, not from the network) on randomly sampled windows with a fresh
//! zero hidden state per window, which is exactly the truncation length of
//! the backward pass. Deployment feeds the network its own output instead;
//! see `super::predict`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use super::{AutoencoderParams, Normalization, TrainLogEntry};
use crate::error::{ComputeError, ConfigError, DataError};
use crate::forcing::{Dataset, FORCING_CHANNELS};
use crate::neural::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use crate::neural::dense::{Activation, DenseLayer};
use crate::neural::lstm::{bptt_steps, LstmCell, LstmNetwork};
use crate::neural::{params_to_vec, set_params, Adam, AdamConfig, FlatParams};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmRomParams {
    /// Cell over [loads; previous latent], linear readout to the latent.
    pub network: LstmNetwork,
    /// Standardization of the four load channels.
    pub forcing_norm: Normalization,
}

/// Concatenate standardized loads and the previous latent state into one
/// network input.
pub fn rom_input(f_norm: &DVector<f64>, z_prev: &DVector<f64>) -> DVector<f64> {
    let mut x = DVector::zeros(f_norm.len() + z_prev.len());
    x.rows_mut(0, f_norm.len()).copy_from(f_norm);
    x.rows_mut(f_norm.len(), z_prev.len()).copy_from(z_prev);
    x
}

impl LstmRomParams {
    pub fn init(
        latent_dim: usize,
        hidden_size: usize,
        forcing_norm: Normalization,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(latent_dim >= 1 && hidden_size >= 1);
        assert_eq!(forcing_norm.len(), 4, "four load channels");
        LstmRomParams {
            network: LstmNetwork {
                cell: LstmCell::glorot(4 + latent_dim, hidden_size, rng),
                head: DenseLayer::glorot(latent_dim, hidden_size, Activation::Linear, rng),
            },
            forcing_norm,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.network.head.out_dim()
    }

    pub fn hidden_size(&self) -> usize {
        self.network.cell.hidden_size
    }

    /// Architecture token carried by checkpoints, e.g. `lstm-rom:in8-h45-out4`.
    pub fn arch_token(&self) -> String {
        format!(
            "lstm-rom:in{}-h{}-out{}",
            self.network.cell.input_size,
            self.hidden_size(),
            self.latent_dim()
        )
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let cell = &self.network.cell;
        let head = &self.network.head;
        let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        let ckpt = Checkpoint {
            arch: self.arch_token(),
            meta: vec![
                ("f_mean".to_string(), self.forcing_norm.mean.as_slice().to_vec()),
                ("f_std".to_string(), self.forcing_norm.std.as_slice().to_vec()),
            ],
            params: vec![
                ("cell.w".to_string(), cell.w.clone()),
                ("cell.u".to_string(), cell.u.clone()),
                ("cell.b".to_string(), col(&cell.b)),
                ("head.weight".to_string(), head.weights.clone()),
                ("head.bias".to_string(), col(&head.bias)),
            ],
        };
        write_checkpoint(path, &ckpt)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let p = path.display().to_string();
        let ckpt = read_checkpoint(path)?;
        let bad = |reason: String| DataError::parse(&p, reason);

        let (input_size, hidden, latent) = parse_arch(&ckpt.arch)
            .ok_or_else(|| bad(format!("unsupported architecture `{}`", ckpt.arch)))?;
        if input_size != 4 + latent {
            return Err(bad(format!(
                "unsupported architecture `{}`: input must be 4 loads + latent",
                ckpt.arch
            )));
        }

        if ckpt.meta.len() != 2 || ckpt.meta[0].0 != "f_mean" || ckpt.meta[1].0 != "f_std" {
            return Err(bad("expected meta blocks f_mean, f_std".to_string()));
        }
        for (name, values) in &ckpt.meta {
            if values.len() != 4 {
                return Err(bad(format!(
                    "meta `{name}` has {} values, expected 4",
                    values.len()
                )));
            }
        }
        if ckpt.meta[1].1.iter().any(|&s| s <= 0.0) {
            return Err(bad("f_std must be strictly positive".to_string()));
        }
        let forcing_norm = Normalization {
            mean: DVector::from_column_slice(&ckpt.meta[0].1),
            std: DVector::from_column_slice(&ckpt.meta[1].1),
        };

        let expected: [(&str, (usize, usize)); 5] = [
            ("cell.w", (4 * hidden, input_size)),
            ("cell.u", (4 * hidden, hidden)),
            ("cell.b", (4 * hidden, 1)),
            ("head.weight", (latent, hidden)),
            ("head.bias", (latent, 1)),
        ];
        if ckpt.params.len() != expected.len() {
            return Err(bad(format!(
                "expected {} param blocks, found {}",
                expected.len(),
                ckpt.params.len()
            )));
        }
        for ((name, shape), (found_name, m)) in expected.iter().zip(&ckpt.params) {
            if found_name != name {
                return Err(bad(format!(
                    "expected param block `{name}`, found `{found_name}`"
                )));
            }
            if m.shape() != *shape {
                return Err(bad(format!(
                    "param `{name}` shape {:?} does not match architecture {shape:?}",
                    m.shape()
                )));
            }
        }
        let vecof = |m: &DMatrix<f64>| DVector::from_column_slice(m.as_slice());
        Ok(LstmRomParams {
            network: LstmNetwork {
                cell: LstmCell {
                    input_size,
                    hidden_size: hidden,
                    w: ckpt.params[0].1.clone(),
                    u: ckpt.params[1].1.clone(),
                    b: vecof(&ckpt.params[2].1),
                },
                head: DenseLayer {
                    weights: ckpt.params[3].1.clone(),
                    bias: vecof(&ckpt.params[4].1),
                    activation: Activation::Linear,
                },
            },
            forcing_norm,
        })
    }
}

/// Parse `lstm-rom:in<I>-h<H>-out<O>` into (I, H, O).
fn parse_arch(arch: &str) -> Option<(usize, usize, usize)> {
    let rest = arch.strip_prefix("lstm-rom:")?;
    let mut parts = rest.split('-');
    let input = parts.next()?.strip_prefix("in")?.parse::<usize>().ok()?;
    let hidden = parts.next()?.strip_prefix("h")?.parse::<usize>().ok()?;
    let out = parts.next()?.strip_prefix("out")?.parse::<usize>().ok()?;
    if parts.next().is_some() || input == 0 || hidden == 0 || out == 0 {
        return None;
    }
    Some((input, hidden, out))
}

impl FlatParams for LstmRomParams {
    fn num_params(&self) -> usize {
        self.network.num_params()
    }
    fn append_params(&self, out: &mut Vec<f64>) {
        self.network.append_params(out);
    }
    fn load_params(&mut self, src: &[f64]) -> usize {
        self.network.load_params(src)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmTrainConfig {
    pub epochs: usize,
    /// Window length of each training sample; also the backward-pass
    /// truncation and the span of one zero-initialized hidden state.
    pub truncation: usize,
    /// Windows per gradient step.
    pub batch_size: usize,
    /// Gradient steps per epoch.
    pub batches_per_epoch: usize,
    pub learning_rate: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for LstmTrainConfig {
    fn default() -> Self {
        LstmTrainConfig {
            epochs: 300,
            truncation: 100,
            batch_size: 32,
            batches_per_epoch: 24,
            learning_rate: 1e-3,
            patience: 20,
            seed: 0,
        }
    }
}

impl LstmTrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.epochs == 0 {
            return Err(ConfigError::invalid("epochs", "must be at least 1"));
        }
        if self.truncation == 0 {
            return Err(ConfigError::invalid("truncation", "must be at least 1"));
        }
        if self.batch_size == 0 || self.batches_per_epoch == 0 {
            return Err(ConfigError::invalid(
                "batch_size",
                "batch size and batches per epoch must be at least 1",
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ConfigError::invalid(
                "learning_rate",
                "must be positive and finite",
            ));
        }
        if self.patience == 0 {
            return Err(ConfigError::invalid("patience", "must be at least 1"));
        }
        Ok(())
    }
}

/// What the fit saw in the latent trajectories, for post-hoc sanity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmFitDiagnostics {
    /// Per-latent standard deviation over all training-record trajectories.
    pub latent_std: Vec<f64>,
    /// Latents whose trajectories are (numerically) constant. The dynamics
    /// model trains fine, but these coordinates carry no information.
    pub collapsed_latents: Vec<usize>,
}

/// Train the latent dynamics model against a fixed autoencoder. The last
/// dataset is held out for validation (teacher-forced one-step loss over the
/// whole record); the returned weights are the best-validation snapshot.
pub fn fit_lstm(
    ae: &AutoencoderParams,
    datasets: &[&Dataset],
    hidden_size: usize,
    cfg: &LstmTrainConfig,
) -> Result<(LstmRomParams, Vec<TrainLogEntry>, LstmFitDiagnostics), ComputeError> {
    assert!(datasets.len() >= 2, "need at least one training and one validation record");
    let latent = ae.latent_dim();
    for d in datasets {
        assert_eq!(d.response.n_channels(), ae.n_channels(), "channel count mismatch");
        assert_eq!(
            d.forcing.n_samples(),
            d.response.n_samples(),
            "forcing/response length mismatch"
        );
    }
    for d in datasets {
        if d.forcing.n_samples() < cfg.truncation + 1 {
            return Err(ComputeError::SeriesTooShort {
                len: d.forcing.n_samples(),
                min: cfg.truncation + 1,
            });
        }
    }

    let labels: Vec<String> = FORCING_CHANNELS.iter().map(|s| s.to_string()).collect();
    let fmats: Vec<&DMatrix<f64>> = datasets.iter().map(|d| &d.forcing.data).collect();
    let forcing_norm = Normalization::fit(&fmats, &labels)?;

    // Precompute standardized loads (4 x T) and latent trajectories (L x T).
    let loads: Vec<DMatrix<f64>> = datasets
        .iter()
        .map(|d| forcing_norm.apply(&d.forcing.data.transpose()))
        .collect();
    let latents: Vec<DMatrix<f64>> = datasets
        .iter()
        .map(|d| ae.encode_batch(&d.response.data.transpose()))
        .collect();

    let n_train = datasets.len() - 1;

    // Latent spread over the training trajectories.
    let total: usize = latents[..n_train].iter().map(|z| z.ncols()).sum();
    let mut latent_std = Vec::with_capacity(latent);
    for k in 0..latent {
        let mean: f64 =
            latents[..n_train].iter().map(|z| z.row(k).sum()).sum::<f64>() / total as f64;
        let var: f64 = latents[..n_train]
            .iter()
            .map(|z| z.row(k).iter().map(|v| (v - mean).powi(2)).sum::<f64>())
            .sum::<f64>()
            / total as f64;
        latent_std.push(var.sqrt());
    }
    let collapsed_latents: Vec<usize> = (0..latent).filter(|&k| latent_std[k] < 1e-8).collect();
    let diagnostics = LstmFitDiagnostics {
        latent_std,
        collapsed_latents,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = LstmRomParams::init(latent, hidden_size, forcing_norm, &mut rng);
    let mut adam = Adam::new(
        model.num_params(),
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut params = params_to_vec(&model);

    // Validation inputs: teacher-forced over the whole held-out record.
    let (val_xs, val_ts) = window_steps(&loads[n_train], &latents[n_train], 1, loads[n_train].ncols() - 1);

    let w = cfg.truncation;
    let in_dim = 4 + latent;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let mut stalled = 0usize;

    for epoch in 1..=cfg.epochs {
        let mut train_acc = 0.0;
        for _ in 0..cfg.batches_per_epoch {
            // Sample windows: (record, start) with start's predecessor valid.
            let mut xs = vec![DMatrix::zeros(in_dim, cfg.batch_size); w];
            let mut ts = vec![DMatrix::zeros(latent, cfg.batch_size); w];
            for b in 0..cfg.batch_size {
                let r = rng.random_range(0..n_train);
                let t_len = loads[r].ncols();
                let s = rng.random_range(1..=t_len - w);
                for k in 0..w {
                    let t = s + k;
                    for c in 0..4 {
                        xs[k][(c, b)] = loads[r][(c, t)];
                    }
                    for c in 0..latent {
                        xs[k][(4 + c, b)] = latents[r][(c, t - 1)];
                        ts[k][(c, b)] = latents[r][(c, t)];
                    }
                }
            }
            let (loss, grad) = bptt_steps(&model.network, &xs, &ts, w, None);
            let flat = params_to_vec(&grad);
            adam.step(&mut params, &flat);
            set_params(&mut model, &params);
            train_acc += loss;
        }
        let train_loss = train_acc / cfg.batches_per_epoch as f64;

        let val_ys = model.network.teacher_forced_outputs(&val_xs, None);
        let mut val_sse = 0.0;
        for (y, t) in val_ys.iter().zip(&val_ts) {
            val_sse += (y - t).map(|d| d * d).sum();
        }
        let val_loss = val_sse / (val_ts.len() * latent) as f64;

        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(ComputeError::TrainingDiverged { epoch });
        }
        log.push(TrainLogEntry {
            epoch,
            train_loss,
            val_loss,
        });

        if val_loss < best_val {
            best_val = val_loss;
            best_params.copy_from_slice(&params);
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= cfg.patience {
                break;
            }
        }
    }

    set_params(&mut model, &best_params);
    Ok((model, log, diagnostics))
}

/// Teacher-forced step sequences over `[start, start + count)`: input at t is
/// [loads(t); latents(t-1)], target latents(t). Single-column batches.
fn window_steps(
    loads: &DMatrix<f64>,
    latents: &DMatrix<f64>,
    start: usize,
    count: usize,
) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    assert!(start >= 1 && start + count <= loads.ncols());
    let latent = latents.nrows();
    let in_dim = 4 + latent;
    let mut xs = Vec::with_capacity(count);
    let mut ts = Vec::with_capacity(count);
    for t in start..start + count {
        let mut x = DMatrix::zeros(in_dim, 1);
        for c in 0..4 {
            x[(c, 0)] = loads[(c, t)];
        }
        for c in 0..latent {
            x[(4 + c, 0)] = latents[(c, t - 1)];
        }
        xs.push(x);
        ts.push(DMatrix::from_column_slice(latent, 1, latents.column(t).as_slice()));
    }
    (xs, ts)
}
