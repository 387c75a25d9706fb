//! Adam optimizer over a flat parameter vector.
//!
//! Standard bias-corrected first/second moment estimates:
//!
//! ```text
//! m <- b1 m + (1 - b1) g        v <- b2 v + (1 - b2) g^2
//! p <- p - lr * m / (1 - b1^t) / (sqrt(v / (1 - b2^t)) + eps)
//! ```
//!
//! The optimizer owns its moment state; callers keep parameters and
//! gradients as plain slices, which keeps it agnostic of network structure.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    /// Steps taken so far.
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Apply one update in place. `params` and `grads` must both match the
    /// length the optimizer was built for.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        self.t += 1;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        let lr = self.cfg.learning_rate;
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_but_advances_counter() {
        let mut adam = Adam::new(3, AdamConfig::default());
        let mut p = [1.0, -2.0, 0.5];
        adam.step(&mut p, &[0.0; 3]);
        assert_eq!(p, [1.0, -2.0, 0.5]);
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        // With bias correction, m_hat = g and v_hat = g^2 on step one, so the
        // update is lr * g / (|g| + eps) ~= lr * sign(g).
        let mut adam = Adam::new(2, AdamConfig::default());
        let mut p = [0.0, 0.0];
        adam.step(&mut p, &[0.37, -42.0]);
        assert!((p[0] + 1e-3).abs() < 1e-9, "step {}", p[0]);
        assert!((p[1] - 1e-3).abs() < 1e-9, "step {}", p[1]);
    }

    #[test]
    fn deterministic_given_identical_inputs() {
        let run = || {
            let mut adam = Adam::new(4, AdamConfig::default());
            let mut p = [0.1, 0.2, 0.3, 0.4];
            for k in 1..100 {
                let g: Vec<f64> = (0..4).map(|i| ((k * (i + 1)) as f64 * 0.01).sin()).collect();
                adam.step(&mut p, &g);
            }
            p
        };
        let a = run();
        let b = run();
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }

    #[test]
    fn descends_a_quadratic_bowl() {
        let mut adam = Adam::new(2, AdamConfig::default());
        let mut p = [3.0, -2.0];
        for _ in 0..8000 {
            let g = [2.0 * p[0], 10.0 * p[1]];
            adam.step(&mut p, &g);
        }
        assert!(p[0].abs() < 1e-3 && p[1].abs() < 1e-3, "ended at {p:?}");
    }
}
