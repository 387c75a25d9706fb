//! Minimal dense/LSTM neural engine with analytic gradients.
//!
//! Everything is f64 and deterministic: parameters initialize from an
//! explicit RNG, training loops own their seeds, and no threading touches
//! the math. Parameters flatten into a single `Vec<f64>` (see `FlatParams`)
//! so one Adam instance can drive any composite of layers; gradient
//! containers mirror their parameter structs and flatten in the same order.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod gradcheck;
pub mod lstm;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use dense::{Activation, DenseGrad, DenseLayer, Mlp};
pub use lstm::{bptt, LstmCell, LstmGrad, LstmNetwork, LstmNetworkGrad};

use nalgebra::DMatrix;

/// Anything whose trainable parameters can round-trip through a flat slice.
/// `load_params` consumes from the front of `src` and returns the number of
/// values taken, so composites chain their members in a fixed order.
pub trait FlatParams {
    fn num_params(&self) -> usize;
    fn append_params(&self, out: &mut Vec<f64>);
    fn load_params(&mut self, src: &[f64]) -> usize;
}

/// Collect all parameters into one vector.
pub fn params_to_vec<P: FlatParams>(p: &P) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.num_params());
    p.append_params(&mut out);
    out
}

/// Overwrite all parameters from one vector; lengths must match exactly.
pub fn set_params<P: FlatParams>(p: &mut P, flat: &[f64]) {
    let used = p.load_params(flat);
    assert_eq!(used, flat.len(), "parameter vector length mismatch");
}

/// Mean squared error over every entry of two equal-shaped matrices.
pub fn mse(prediction: &DMatrix<f64>, target: &DMatrix<f64>) -> f64 {
    assert_eq!(prediction.shape(), target.shape());
    let n = prediction.len() as f64;
    (prediction - target).map(|d| d * d).sum() / n
}

/// Gradient of `mse` with respect to the prediction: 2 (p - t) / n.
pub fn mse_grad(prediction: &DMatrix<f64>, target: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(prediction.shape(), target.shape());
    let n = prediction.len() as f64;
    (prediction - target) * (2.0 / n)
}
