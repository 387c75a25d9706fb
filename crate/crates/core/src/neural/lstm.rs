//! LSTM cell, sequence network, and backpropagation through time.
//!
//! The cell stacks its four gates row-wise in one pre-activation,
//! `pre = W x + U h_prev + b` with row blocks [i, f, g, o]:
//!
//! ```text
//! i = sig(pre_i)   f = sig(pre_f)   g = tanh(pre_g)   o = sig(pre_o)
//! c = f . c_prev + i . g            h = o . tanh(c)
//! ```
//!
//! `bptt` runs the full forward pass, then backpropagates the sequence MSE
//! in truncation windows: gradients flow freely inside a window of
//! `truncation` steps and are cut at window boundaries, the states entering
//! a window being treated as constants. A truncation of at least the
//! sequence length reproduces exact full-sequence BPTT. Inputs are treated
//! as constants throughout, which is precisely the teacher-forcing
//! convention: ground-truth feedback entering the input carries no gradient.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::dense::{DenseGrad, DenseLayer};
use super::FlatParams;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub input_size: usize,
    pub hidden_size: usize,
    /// 4h x input: stacked gate blocks [i, f, g, o].
    pub w: DMatrix<f64>,
    /// 4h x h recurrent weights, same block order.
    pub u: DMatrix<f64>,
    /// 4h bias, forget block initialized to one.
    pub b: DVector<f64>,
}

/// Parameter gradients of a cell, same shapes and block order.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrad {
    pub w: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Everything the backward pass needs about one forward step.
#[derive(Debug, Clone)]
pub struct GateCache {
    pub x: DMatrix<f64>,
    pub h_prev: DMatrix<f64>,
    pub c_prev: DMatrix<f64>,
    pub i: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub o: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub tanh_c: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

fn sigmoid(m: &mut DMatrix<f64>) {
    m.apply(|v| *v = 1.0 / (1.0 + (-*v).exp()));
}

impl LstmCell {
    /// Glorot-uniform weights per gate block, zero bias except the forget
    /// block at one (keeps early memory open).
    pub fn glorot(input_size: usize, hidden_size: usize, rng: &mut impl Rng) -> Self {
        let limit_w = (6.0 / (input_size + hidden_size) as f64).sqrt();
        let limit_u = (6.0 / (2 * hidden_size) as f64).sqrt();
        let mut b = DVector::zeros(4 * hidden_size);
        for k in hidden_size..2 * hidden_size {
            b[k] = 1.0;
        }
        LstmCell {
            input_size,
            hidden_size,
            w: DMatrix::from_fn(4 * hidden_size, input_size, |_, _| {
                rng.random_range(-limit_w..limit_w)
            }),
            u: DMatrix::from_fn(4 * hidden_size, hidden_size, |_, _| {
                rng.random_range(-limit_u..limit_u)
            }),
            b,
        }
    }

    pub fn zero_grad(&self) -> LstmGrad {
        LstmGrad {
            w: DMatrix::zeros(self.w.nrows(), self.w.ncols()),
            u: DMatrix::zeros(self.u.nrows(), self.u.ncols()),
            b: DVector::zeros(self.b.len()),
        }
    }

    /// One step over a batch (columns are sequences).
    pub fn step_batch(
        &self,
        x: &DMatrix<f64>,
        h_prev: &DMatrix<f64>,
        c_prev: &DMatrix<f64>,
    ) -> GateCache {
        let hs = self.hidden_size;
        let mut pre = &self.w * x + &self.u * h_prev;
        for mut col in pre.column_iter_mut() {
            col += &self.b;
        }
        let mut i = pre.rows(0, hs).into_owned();
        let mut f = pre.rows(hs, hs).into_owned();
        let mut g = pre.rows(2 * hs, hs).into_owned();
        let mut o = pre.rows(3 * hs, hs).into_owned();
        sigmoid(&mut i);
        sigmoid(&mut f);
        g.apply(|v| *v = v.tanh());
        sigmoid(&mut o);
        let c = f.component_mul(c_prev) + i.component_mul(&g);
        let tanh_c = c.map(f64::tanh);
        let h = o.component_mul(&tanh_c);
        GateCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            i,
            f,
            g,
            o,
            c,
            tanh_c,
            h,
        }
    }

    /// Single-sequence convenience step: returns (h, c).
    pub fn step(
        &self,
        x: &DVector<f64>,
        h_prev: &DVector<f64>,
        c_prev: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let cache = self.step_batch(
            &DMatrix::from_column_slice(x.len(), 1, x.as_slice()),
            &DMatrix::from_column_slice(h_prev.len(), 1, h_prev.as_slice()),
            &DMatrix::from_column_slice(c_prev.len(), 1, c_prev.as_slice()),
        );
        (
            DVector::from_column_slice(cache.h.as_slice()),
            DVector::from_column_slice(cache.c.as_slice()),
        )
    }

    /// Backward through one step. `dh` and `dc_in` are the loss gradients
    /// arriving at this step's h and c outputs; parameter gradients
    /// accumulate into `grad`. Returns (dx, dh_prev, dc_prev).
    pub fn backward_step(
        &self,
        cache: &GateCache,
        dh: &DMatrix<f64>,
        dc_in: &DMatrix<f64>,
        grad: &mut LstmGrad,
    ) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let hs = self.hidden_size;
        let cols = dh.ncols();

        let d_o = dh.component_mul(&cache.tanh_c);
        // dc = dc_in + dh . o . (1 - tanh(c)^2)
        let mut dc = dh.component_mul(&cache.o);
        dc.zip_apply(&cache.tanh_c, |d, tc| *d *= 1.0 - tc * tc);
        dc += dc_in;

        let d_i = dc.component_mul(&cache.g);
        let d_f = dc.component_mul(&cache.c_prev);
        let d_g = dc.component_mul(&cache.i);
        let dc_prev = dc.component_mul(&cache.f);

        // Through the gate nonlinearities to the pre-activations.
        let mut dpre = DMatrix::<f64>::zeros(4 * hs, cols);
        {
            let mut block = dpre.rows_mut(0, hs);
            block.copy_from(&d_i);
            block.zip_apply(&cache.i, |d, s| *d *= s * (1.0 - s));
        }
        {
            let mut block = dpre.rows_mut(hs, hs);
            block.copy_from(&d_f);
            block.zip_apply(&cache.f, |d, s| *d *= s * (1.0 - s));
        }
        {
            let mut block = dpre.rows_mut(2 * hs, hs);
            block.copy_from(&d_g);
            block.zip_apply(&cache.g, |d, t| *d *= 1.0 - t * t);
        }
        {
            let mut block = dpre.rows_mut(3 * hs, hs);
            block.copy_from(&d_o);
            block.zip_apply(&cache.o, |d, s| *d *= s * (1.0 - s));
        }

        grad.w += &dpre * cache.x.transpose();
        grad.u += &dpre * cache.h_prev.transpose();
        grad.b += dpre.column_sum();

        let dx = self.w.transpose() * &dpre;
        let dh_prev = self.u.transpose() * &dpre;
        (dx, dh_prev, dc_prev)
    }
}

impl FlatParams for LstmCell {
    fn num_params(&self) -> usize {
        self.w.len() + self.u.len() + self.b.len()
    }
    fn append_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w.as_slice());
        out.extend_from_slice(self.u.as_slice());
        out.extend_from_slice(self.b.as_slice());
    }
    fn load_params(&mut self, src: &[f64]) -> usize {
        let (nw, nu, nb) = (self.w.len(), self.u.len(), self.b.len());
        self.w.as_mut_slice().copy_from_slice(&src[..nw]);
        self.u.as_mut_slice().copy_from_slice(&src[nw..nw + nu]);
        self.b.as_mut_slice().copy_from_slice(&src[nw + nu..nw + nu + nb]);
        nw + nu + nb
    }
}

impl FlatParams for LstmGrad {
    fn num_params(&self) -> usize {
        self.w.len() + self.u.len() + self.b.len()
    }
    fn append_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w.as_slice());
        out.extend_from_slice(self.u.as_slice());
        out.extend_from_slice(self.b.as_slice());
    }
    fn load_params(&mut self, src: &[f64]) -> usize {
        let (nw, nu, nb) = (self.w.len(), self.u.len(), self.b.len());
        self.w.as_mut_slice().copy_from_slice(&src[..nw]);
        self.u.as_mut_slice().copy_from_slice(&src[nw..nw + nu]);
        self.b.as_mut_slice().copy_from_slice(&src[nw + nu..nw + nu + nb]);
        nw + nu + nb
    }
}

/// LSTM followed by a dense readout applied to every hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmNetwork {
    pub cell: LstmCell,
    pub head: DenseLayer,
}

/// Gradients of the full network, flattening as (cell, head).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmNetworkGrad {
    pub cell: LstmGrad,
    pub head: DenseGrad,
}

impl FlatParams for LstmNetwork {
    fn num_params(&self) -> usize {
        self.cell.num_params() + self.head.num_params()
    }
    fn append_params(&self, out: &mut Vec<f64>) {
        self.cell.append_params(out);
        self.head.append_params(out);
    }
    fn load_params(&mut self, src: &[f64]) -> usize {
        let a = self.cell.load_params(src);
        a + self.head.load_params(&src[a..])
    }
}

impl FlatParams for LstmNetworkGrad {
    fn num_params(&self) -> usize {
        self.cell.num_params() + self.head.num_params()
    }
    fn append_params(&self, out: &mut Vec<f64>) {
        self.cell.append_params(out);
        self.head.append_params(out);
    }
    fn load_params(&mut self, src: &[f64]) -> usize {
        let a = self.cell.load_params(src);
        a + self.head.load_params(&src[a..])
    }
}

impl LstmNetwork {
    pub fn zero_grad(&self) -> LstmNetworkGrad {
        LstmNetworkGrad {
            cell: self.cell.zero_grad(),
            head: self.head.zero_grad(),
        }
    }

    /// Forward-only pass over a step sequence (each entry in x batch form),
    /// returning the readout at every step. Constant memory in T.
    pub fn teacher_forced_outputs(
        &self,
        xs: &[DMatrix<f64>],
        initial: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
    ) -> Vec<DMatrix<f64>> {
        let cols = xs.first().map_or(0, |x| x.ncols());
        let hs = self.cell.hidden_size;
        let (mut h, mut c) = match initial {
            Some((h0, c0)) => (h0.clone(), c0.clone()),
            None => (DMatrix::zeros(hs, cols), DMatrix::zeros(hs, cols)),
        };
        let mut ys = Vec::with_capacity(xs.len());
        for x in xs {
            let cache = self.cell.step_batch(x, &h, &c);
            ys.push(self.head.forward_batch(&cache.h));
            h = cache.h;
            c = cache.c;
        }
        ys
    }
}

/// Sequence MSE and its gradient by truncated BPTT over batched steps.
/// Windows are [0, tr), [tr, 2 tr), ...; gradient flow is cut at window
/// starts. Loss is the mean squared error over all steps, outputs and batch
/// columns. Inputs carry no gradient (teacher forcing).
pub fn bptt_steps(
    net: &LstmNetwork,
    xs: &[DMatrix<f64>],
    targets: &[DMatrix<f64>],
    truncation: usize,
    initial: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
) -> (f64, LstmNetworkGrad) {
    assert_eq!(xs.len(), targets.len(), "inputs/targets length mismatch");
    assert!(!xs.is_empty(), "empty sequence");
    assert!(truncation >= 1, "truncation must be at least 1");
    let t_len = xs.len();
    let cols = xs[0].ncols();
    let hs = net.cell.hidden_size;
    let out_dim = net.head.out_dim();

    // Forward, caching every step.
    let (mut h, mut c) = match initial {
        Some((h0, c0)) => (h0.clone(), c0.clone()),
        None => (DMatrix::zeros(hs, cols), DMatrix::zeros(hs, cols)),
    };
    let mut caches = Vec::with_capacity(t_len);
    let mut ys = Vec::with_capacity(t_len);
    for x in xs {
        let cache = net.cell.step_batch(x, &h, &c);
        ys.push(net.head.forward_batch(&cache.h));
        h = cache.h.clone();
        c = cache.c.clone();
        caches.push(cache);
    }

    let denom = (t_len * out_dim * cols) as f64;
    let mut loss = 0.0;
    for (y, t) in ys.iter().zip(targets) {
        loss += (y - t).map(|d| d * d).sum();
    }
    loss /= denom;

    // Backward in truncation windows, last window first.
    let mut grad = net.zero_grad();
    let starts: Vec<usize> = (0..t_len).step_by(truncation).collect();
    for &start in starts.iter().rev() {
        let end = (start + truncation).min(t_len);
        let mut dh_next = DMatrix::<f64>::zeros(hs, cols);
        let mut dc_next = DMatrix::<f64>::zeros(hs, cols);
        for t in (start..end).rev() {
            let dy = (&ys[t] - &targets[t]) * (2.0 / denom);
            let (dh_head, head_grad) = net.head.backward_batch(&caches[t].h, &ys[t], &dy);
            grad.head.weights += head_grad.weights;
            grad.head.bias += head_grad.bias;
            let dh_total = &dh_head + &dh_next;
            let (_dx, dh_prev, dc_prev) =
                net.cell
                    .backward_step(&caches[t], &dh_total, &dc_next, &mut grad.cell);
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        // dh_next / dc_next die here: the window boundary cuts the flow.
    }
    (loss, grad)
}

/// Truncated BPTT over one sequence given as matrices with one column per
/// time step: `inputs` is in x T, `targets` out x T.
pub fn bptt(
    net: &LstmNetwork,
    inputs: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    truncation: usize,
    initial: Option<(&DVector<f64>, &DVector<f64>)>,
) -> (f64, LstmNetworkGrad) {
    assert_eq!(inputs.ncols(), targets.ncols(), "sequence length mismatch");
    let xs: Vec<DMatrix<f64>> = inputs
        .column_iter()
        .map(|c| DMatrix::from_column_slice(inputs.nrows(), 1, c.as_slice()))
        .collect();
    let ts: Vec<DMatrix<f64>> = targets
        .column_iter()
        .map(|c| DMatrix::from_column_slice(targets.nrows(), 1, c.as_slice()))
        .collect();
    let init_mats = initial.map(|(h0, c0)| {
        (
            DMatrix::from_column_slice(h0.len(), 1, h0.as_slice()),
            DMatrix::from_column_slice(c0.len(), 1, c0.as_slice()),
        )
    });
    bptt_steps(
        net,
        &xs,
        &ts,
        truncation,
        init_mats.as_ref().map(|(h, c)| (h, c)),
    )
}
