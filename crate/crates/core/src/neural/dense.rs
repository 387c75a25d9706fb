//! Fully connected layers and their stacks.
//!
//! A layer computes `act(W x + b)` column-wise over a batch. The backward
//! pass consumes the cached input and output (tanh's derivative is
//! reconstructed from the output, 1 - y^2) and returns both the input
//! gradient and the parameter gradients, unscaled - loss normalization is
//! the caller's business.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::FlatParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Tanh,
}

impl Activation {
    fn apply_in_place(&self, m: &mut DMatrix<f64>) {
        if let Activation::Tanh = self {
            m.apply(|v| *v = v.tanh());
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(&self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }

    /// One-letter tag used in checkpoint architecture strings.
    pub fn tag(&self) -> char {
        match self {
            Activation::Linear => 'l',
            Activation::Tanh => 't',
        }
    }

    pub fn from_tag(c: char) -> Option<Self> {
        match c {
            'l' => Some(Activation::Linear),
            't' => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// out_dim x in_dim.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

/// Parameter gradients of one layer, same shapes as the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl DenseLayer {
    /// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out))), zero bias.
    pub fn glorot(
        out_dim: usize,
        in_dim: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        DenseLayer {
            weights: DMatrix::from_fn(out_dim, in_dim, |_, _| rng.random_range(-limit..limit)),
            bias: DVector::zeros(out_dim),
            activation,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    /// Forward a batch: columns are examples.
    pub fn forward_batch(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = &self.weights * x;
        for mut col in y.column_iter_mut() {
            col += &self.bias;
        }
        self.activation.apply_in_place(&mut y);
        y
    }

    pub fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = &self.weights * x + &self.bias;
        if let Activation::Tanh = self.activation {
            y.apply(|v| *v = v.tanh());
        }
        y
    }

    /// Backward a batch given the cached input `x`, cached output `y` and the
    /// loss gradient `dy` at the output. Returns (dx, parameter gradients).
    pub fn backward_batch(
        &self,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        dy: &DMatrix<f64>,
    ) -> (DMatrix<f64>, DenseGrad) {
        let mut dz = dy.clone();
        dz.zip_apply(y, |d, yv| *d *= self.activation.derivative_from_output(yv));
        let grad = DenseGrad {
            weights: &dz * x.transpose(),
            bias: dz.column_sum(),
        };
        (self.weights.transpose() * dz, grad)
    }

    pub fn zero_grad(&self) -> DenseGrad {
        DenseGrad {
            weights: DMatrix::zeros(self.out_dim(), self.in_dim()),
            bias: DVector::zeros(self.out_dim()),
        }
    }
}

impl FlatParams for DenseLayer {
    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
    fn append_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.weights.as_slice());
        out.extend_from_slice(self.bias.as_slice());
    }
    fn load_params(&mut self, src: &[f64]) -> usize {
        let nw = self.weights.len();
        let nb = self.bias.len();
        self.weights.as_mut_slice().copy_from_slice(&src[..nw]);
        self.bias.as_mut_slice().copy_from_slice(&src[nw..nw + nb]);
        nw + nb
    }
}

impl FlatParams for DenseGrad {
    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
    fn append_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.weights.as_slice());
        out.extend_from_slice(self.bias.as_slice());
    }
    fn load_params(&mut self, src: &[f64]) -> usize {
        let nw = self.weights.len();
        let nb = self.bias.len();
        self.weights.as_mut_slice().copy_from_slice(&src[..nw]);
        self.bias.as_mut_slice().copy_from_slice(&src[nw..nw + nb]);
        nw + nb
    }
}

/// A feed-forward stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward(&h);
        }
        h
    }

    /// Forward a batch keeping every intermediate activation; entry 0 is the
    /// input, entry L the output.
    pub fn forward_batch_cached(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward_batch(acts.last().unwrap());
            acts.push(next);
        }
        acts
    }

    pub fn forward_batch(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward_batch(&h);
        }
        h
    }

    /// Backward from the output gradient through every layer. Returns the
    /// input gradient and per-layer parameter gradients (front to back).
    pub fn backward_batch(
        &self,
        acts: &[DMatrix<f64>],
        d_out: &DMatrix<f64>,
    ) -> (DMatrix<f64>, Vec<DenseGrad>) {
        assert_eq!(acts.len(), self.layers.len() + 1);
        let mut grads: Vec<DenseGrad> = Vec::with_capacity(self.layers.len());
        let mut d = d_out.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let (dx, g) = layer.backward_batch(&acts[idx], &acts[idx + 1], &d);
            grads.push(g);
            d = dx;
        }
        grads.reverse();
        (d, grads)
    }
}

impl FlatParams for Mlp {
    fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.num_params()).sum()
    }
    fn append_params(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            l.append_params(out);
        }
    }
    fn load_params(&mut self, src: &[f64]) -> usize {
        let mut off = 0;
        for l in &mut self.layers {
            off += l.load_params(&src[off..]);
        }
        off
    }
}
