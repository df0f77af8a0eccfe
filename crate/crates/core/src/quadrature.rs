//! Composite Simpson weights on (possibly non-uniform) grids.

use crate::error::{Error, Result};

/// Weights w with ∫ f ≈ Σ wᵢ f(tᵢ). Requires an odd node count ≥ 3; each
/// pair of intervals uses the non-uniform Simpson formula.
pub fn simpson_weights(times: &[f64]) -> Result<Vec<f64>> {
    let n = times.len();
    if n < 3 {
        return Err(Error::GridTooCoarse { nodes: n, required: 3 });
    }
    if n.is_multiple_of(2) {
        return Err(Error::GridMismatch(format!(
            "Simpson quadrature needs an odd node count, got {n}"
        )));
    }
    let mut w = vec![0.0; n];
    for i in (0..n - 1).step_by(2) {
        let h0 = times[i + 1] - times[i];
        let h1 = times[i + 2] - times[i + 1];
        let s = h0 + h1;
        w[i] += s / 6.0 * (2.0 - h1 / h0);
        w[i + 1] += s / 6.0 * s * s / (h0 * h1);
        w[i + 2] += s / 6.0 * (2.0 - h0 / h1);
    }
    Ok(w)
}

pub fn simpson(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::GridMismatch(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    let w = simpson_weights(times)?;
    Ok(w.iter().zip(values).map(|(w, v)| w * v).sum())
}

/// Three-point first and second derivative weights at an interior node with
/// left spacing `h0` and right spacing `h1`: returns ([a, b, c], [d, e, f]) so
/// that y′ ≈ a y₋ + b y₀ + c y₊ and y″ ≈ d y₋ + e y₀ + f y₊.
pub(crate) fn three_point(h0: f64, h1: f64) -> ([f64; 3], [f64; 3]) {
    let s = h0 + h1;
    let first = [-h1 / (h0 * s), (h1 - h0) / (h0 * h1), h0 / (h1 * s)];
    let second = [2.0 / (h0 * s), -2.0 / (h0 * h1), 2.0 / (h1 * s)];
    (first, second)
}
