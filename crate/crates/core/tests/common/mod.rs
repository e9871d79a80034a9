#![allow(dead_code)]

use precmat::data::{sample_covariance, DatasetMatrix};
use precmat::linalg::{Dense, SymMatrix};
use precmat::solver::DetSolverConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_data(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DatasetMatrix<f64> {
    DatasetMatrix::new(Dense::from_fn(n, p, |_, _| rng.sample(StandardNormal))).unwrap()
}

/// `X^T X / n` for standard normal `X`.
pub fn wishart(p: usize, n: usize, rng: &mut ChaCha8Rng) -> SymMatrix<f64> {
    sample_covariance(&normal_data(n, p, rng), false)
}

pub fn tight(gamma0: f64, rel_tol: f64) -> DetSolverConfig<f64> {
    DetSolverConfig {
        gamma0: Some(gamma0),
        rel_tol,
        max_iters: 200_000,
        ..Default::default()
    }
}
