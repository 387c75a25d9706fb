//! Finite-difference verification helpers for analytic gradients.
//!
//! Used by the test suites to validate every backward pass against central
//! differences on randomized small instances; kept public so integration
//! tests can reuse the same harness.

/// Central finite-difference gradient of a scalar function at `x`.
pub fn fd_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut work = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = work[i];
        work[i] = orig + h;
        let up = f(&work);
        work[i] = orig - h;
        let down = f(&work);
        work[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    grad
}

/// Worst relative disagreement between two gradient vectors, with a floor
/// that keeps near-zero components from dominating.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_gradient_of_known_function() {
        // f(x) = x0^2 + 3 x0 x1 has gradient (2 x0 + 3 x1, 3 x0).
        let f = |p: &[f64]| p[0] * p[0] + 3.0 * p[0] * p[1];
        let x = [1.5, -0.7];
        let g = fd_gradient(f, &x, 1e-6);
        assert!((g[0] - (2.0 * 1.5 + 3.0 * -0.7)).abs() < 1e-8);
        assert!((g[1] - 3.0 * 1.5).abs() < 1e-8);
        assert!(max_rel_err(&g, &[0.9, 4.5], 1e-12) < 1e-8);
    }
}
