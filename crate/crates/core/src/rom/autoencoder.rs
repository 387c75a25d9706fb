//! Snapshot autoencoder: standardized response snapshots compressed to a
//! few latent coordinates.
//!
//! Encoder and decoder are two-layer perceptrons; the decoder's output layer
//! is linear so reconstructions are not range-limited. All training happens
//! in standardized units (per-channel mean/std over the training corpus);
//! `encode`/`decode` fold the standardization in, so callers only ever see
//! physical units. With freshly initialized weights (zero biases) the
//! quiescent snapshot maps to the zero latent vector, which anchors
//! free-running rollouts.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use super::{Normalization, TrainLogEntry};
use crate::error::{ComputeError, ConfigError, DataError};
use crate::integrator::{channel_names, SimulationResult};
use crate::neural::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use crate::neural::dense::{Activation, DenseLayer, Mlp};
use crate::neural::{mse, mse_grad, params_to_vec, set_params, Adam, AdamConfig, FlatParams};

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    /// channels -> channels (tanh) -> latent (tanh).
    pub encoder: Mlp,
    /// latent -> channels (tanh) -> channels (linear).
    pub decoder: Mlp,
    /// Per-channel standardization folded into encode/decode.
    pub norm: Normalization,
}

impl AutoencoderParams {
    /// Fresh Glorot-initialized model with zero biases.
    pub fn init(
        n_channels: usize,
        latent_dim: usize,
        norm: Normalization,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(latent_dim >= 1 && latent_dim < n_channels);
        assert_eq!(norm.len(), n_channels);
        AutoencoderParams {
            encoder: Mlp {
                layers: vec![
                    DenseLayer::glorot(n_channels, n_channels, Activation::Tanh, rng),
                    DenseLayer::glorot(latent_dim, n_channels, Activation::Tanh, rng),
                ],
            },
            decoder: Mlp {
                layers: vec![
                    DenseLayer::glorot(n_channels, latent_dim, Activation::Tanh, rng),
                    DenseLayer::glorot(n_channels, n_channels, Activation::Linear, rng),
                ],
            },
            norm,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.encoder.layers[0].in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.layers.last().unwrap().out_dim()
    }

    /// Physical snapshot -> latent coordinates.
    pub fn encode(&self, x: &DVector<f64>) -> DVector<f64> {
        self.encoder.forward(&self.norm.apply_vec(x))
    }

    /// Latent coordinates -> physical snapshot.
    pub fn decode(&self, z: &DVector<f64>) -> DVector<f64> {
        self.norm.invert_vec(&self.decoder.forward(z))
    }

    /// Batch encode; columns are snapshots (channels x N -> latent x N).
    pub fn encode_batch(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.encoder.forward_batch(&self.norm.apply(x))
    }

    /// Batch decode; columns are snapshots (latent x N -> channels x N).
    pub fn decode_batch(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        self.norm.invert(&self.decoder.forward_batch(z))
    }

    /// Architecture token carried by checkpoints, e.g.
    /// `autoencoder:62-62t-4t-62t-62l`.
    pub fn arch_token(&self) -> String {
        let mut s = format!("autoencoder:{}", self.n_channels());
        for layer in self.encoder.layers.iter().chain(&self.decoder.layers) {
            s.push_str(&format!("-{}{}", layer.out_dim(), layer.activation.tag()));
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let names = ["enc1", "enc2", "dec1", "dec2"];
        let mut params = Vec::new();
        for (name, layer) in names
            .iter()
            .zip(self.encoder.layers.iter().chain(&self.decoder.layers))
        {
            params.push((format!("{name}.weight"), layer.weights.clone()));
            let nb = layer.bias.len();
            params.push((
                format!("{name}.bias"),
                DMatrix::from_column_slice(nb, 1, layer.bias.as_slice()),
            ));
        }
        let ckpt = Checkpoint {
            arch: self.arch_token(),
            meta: vec![
                ("x_mean".to_string(), self.norm.mean.as_slice().to_vec()),
                ("x_std".to_string(), self.norm.std.as_slice().to_vec()),
            ],
            params,
        };
        write_checkpoint(path, &ckpt)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let p = path.display().to_string();
        let ckpt = read_checkpoint(path)?;
        let bad = |reason: String| DataError::parse(&p, reason);

        let dims = parse_arch(&ckpt.arch)
            .ok_or_else(|| bad(format!("unsupported architecture `{}`", ckpt.arch)))?;
        let (n_ch, latent) = (dims[0].0, dims[2].0);
        if dims[1] != (n_ch, Activation::Tanh)
            || dims[2].1 != Activation::Tanh
            || dims[3] != (n_ch, Activation::Tanh)
            || dims[4] != (n_ch, Activation::Linear)
            || latent >= n_ch
        {
            return Err(bad(format!("unsupported architecture `{}`", ckpt.arch)));
        }

        if ckpt.meta.len() != 2 || ckpt.meta[0].0 != "x_mean" || ckpt.meta[1].0 != "x_std" {
            return Err(bad("expected meta blocks x_mean, x_std".to_string()));
        }
        for (name, values) in &ckpt.meta {
            if values.len() != n_ch {
                return Err(bad(format!(
                    "meta `{name}` has {} values, architecture needs {n_ch}",
                    values.len()
                )));
            }
        }
        if ckpt.meta[1].1.iter().any(|&s| s <= 0.0) {
            return Err(bad("x_std must be strictly positive".to_string()));
        }
        let norm = Normalization {
            mean: DVector::from_column_slice(&ckpt.meta[0].1),
            std: DVector::from_column_slice(&ckpt.meta[1].1),
        };

        // Layer shapes implied by the architecture chain.
        let layer_specs = [
            ("enc1", dims[1].0, dims[0].0, dims[1].1),
            ("enc2", dims[2].0, dims[1].0, dims[2].1),
            ("dec1", dims[3].0, dims[2].0, dims[3].1),
            ("dec2", dims[4].0, dims[3].0, dims[4].1),
        ];
        if ckpt.params.len() != 2 * layer_specs.len() {
            return Err(bad(format!(
                "expected {} param blocks, found {}",
                2 * layer_specs.len(),
                ckpt.params.len()
            )));
        }
        let mut layers = Vec::new();
        for (k, &(name, out, inp, act)) in layer_specs.iter().enumerate() {
            let (wname, w) = &ckpt.params[2 * k];
            let (bname, b) = &ckpt.params[2 * k + 1];
            if wname != &format!("{name}.weight") || bname != &format!("{name}.bias") {
                return Err(bad(format!(
                    "expected param blocks {name}.weight, {name}.bias, found `{wname}`, `{bname}`"
                )));
            }
            if w.shape() != (out, inp) || b.shape() != (out, 1) {
                return Err(bad(format!(
                    "param `{name}` shape {:?}/{:?} does not match architecture ({out} x {inp})",
                    w.shape(),
                    b.shape()
                )));
            }
            layers.push(DenseLayer {
                weights: w.clone(),
                bias: DVector::from_column_slice(b.as_slice()),
                activation: act,
            });
        }
        let mut it = layers.into_iter();
        let encoder = Mlp {
            layers: vec![it.next().unwrap(), it.next().unwrap()],
        };
        let decoder = Mlp {
            layers: vec![it.next().unwrap(), it.next().unwrap()],
        };
        Ok(AutoencoderParams {
            encoder,
            decoder,
            norm,
        })
    }
}

/// Parse `autoencoder:<n>-<n1><a1>-<n2><a2>-<n3><a3>-<n4><a4>` into five
/// (size, activation) entries; the input entry carries a placeholder linear
/// activation.
fn parse_arch(arch: &str) -> Option<[(usize, Activation); 5]> {
    let rest = arch.strip_prefix("autoencoder:")?;
    let tokens: Vec<&str> = rest.split('-').collect();
    if tokens.len() != 5 {
        return None;
    }
    let mut out = [(0usize, Activation::Linear); 5];
    out[0] = (tokens[0].parse::<usize>().ok().filter(|&n| n > 0)?, Activation::Linear);
    for (k, tok) in tokens.iter().enumerate().skip(1) {
        let (num, tag) = tok.split_at(tok.len().checked_sub(1)?);
        let act = Activation::from_tag(tag.chars().next()?)?;
        out[k] = (num.parse::<usize>().ok().filter(|&n| n > 0)?, act);
    }
    Some(out)
}

impl FlatParams for AutoencoderParams {
    fn num_params(&self) -> usize {
        self.encoder.num_params() + self.decoder.num_params()
    }
    fn append_params(&self, out: &mut Vec<f64>) {
        self.encoder.append_params(out);
        self.decoder.append_params(out);
    }
    fn load_params(&mut self, src: &[f64]) -> usize {
        let a = self.encoder.load_params(src);
        a + self.decoder.load_params(&src[a..])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        AeTrainConfig {
            epochs: 200,
            batch_size: 256,
            learning_rate: 1e-3,
            patience: 15,
            seed: 0,
        }
    }
}

impl AeTrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.epochs == 0 {
            return Err(ConfigError::invalid("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::invalid("batch_size", "must be at least 1"));
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

/// Train an autoencoder on response records. The last record is held out for
/// validation and early stopping; the returned weights are the ones with the
/// best validation loss. Losses in the log are in standardized units, so a
/// loss of `x` is a reconstruction NMSE of roughly `100 x` percent.
pub fn fit_autoencoder(
    records: &[&SimulationResult],
    latent_dim: usize,
    cfg: &AeTrainConfig,
) -> Result<(AutoencoderParams, Vec<TrainLogEntry>), ComputeError> {
    assert!(records.len() >= 2, "need at least one training and one validation record");
    let n_ch = records[0].n_channels();
    assert!(records.iter().all(|r| r.n_channels() == n_ch), "channel count mismatch");
    assert!(
        n_ch.is_multiple_of(2),
        "channels pair up as two bending planes"
    );
    assert!(latent_dim >= 1 && latent_dim < n_ch);

    let labels = channel_names(n_ch / 2);
    let mats: Vec<&DMatrix<f64>> = records.iter().map(|r| &r.data).collect();
    let norm = Normalization::fit(&mats, &labels)?;

    // Standardized snapshots, columns as examples; last record held out.
    let (val_rec, train_recs) = records.split_last().unwrap();
    let n_train: usize = train_recs.iter().map(|r| r.n_samples()).sum();
    let mut train_snaps = DMatrix::zeros(n_ch, n_train);
    let mut col = 0;
    for rec in train_recs {
        let block = norm.apply(&rec.data.transpose());
        train_snaps.columns_mut(col, block.ncols()).copy_from(&block);
        col += block.ncols();
    }
    let val_snaps = norm.apply(&val_rec.data.transpose());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = AutoencoderParams::init(n_ch, latent_dim, norm, &mut rng);
    let mut adam = Adam::new(
        model.num_params(),
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut params = params_to_vec(&model);
    let mut flat_grad = vec![0.0; params.len()];

    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let mut stalled = 0usize;
    let mut indices: Vec<usize> = (0..n_train).collect();

    for epoch in 1..=cfg.epochs {
        indices.shuffle(&mut rng);
        let mut sse_entries = 0.0;
        for chunk in indices.chunks(cfg.batch_size) {
            let xb = DMatrix::from_fn(n_ch, chunk.len(), |r, k| train_snaps[(r, chunk[k])]);
            let enc_acts = model.encoder.forward_batch_cached(&xb);
            let dec_acts = model.decoder.forward_batch_cached(enc_acts.last().unwrap());
            let xhat = dec_acts.last().unwrap();

            let dy = mse_grad(xhat, &xb);
            let (dz, dec_grads) = model.decoder.backward_batch(&dec_acts, &dy);
            let (_, enc_grads) = model.encoder.backward_batch(&enc_acts, &dz);

            flat_grad.clear();
            for g in enc_grads.iter().chain(&dec_grads) {
                g.append_params(&mut flat_grad);
            }
            adam.step(&mut params, &flat_grad);
            set_params(&mut model, &params);

            sse_entries += mse(xhat, &xb) * (xb.len() as f64);
        }
        let train_loss = sse_entries / (n_train * n_ch) as f64;
        let val_loss = mse(
            &model.decoder.forward_batch(&model.encoder.forward_batch(&val_snaps)),
            &val_snaps,
        );
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
    Ok((model, log))
}
