//! Random matrix fixtures for unit tests.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::SymMatrix;

/// `G G^T / n + floor * I` for a standard normal `n x n` matrix `G`.
pub(crate) fn random_spd<R: Rng>(n: usize, floor: f64, rng: &mut R) -> SymMatrix<f64> {
    let g: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
    SymMatrix::from_lower_fn(n, |i, j| {
        let dot: f64 = (0..n).map(|k| g[i * n + k] * g[j * n + k]).sum();
        dot / n as f64 + if i == j { floor } else { 0.0 }
    })
}

/// Symmetric matrix with standard normal lower triangle.
pub(crate) fn random_sym<R: Rng>(n: usize, rng: &mut R) -> SymMatrix<f64> {
    SymMatrix::from_lower_fn(n, |_, _| rng.sample(StandardNormal))
}
