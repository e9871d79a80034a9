//! Draws from `N(0, theta^{-1})` through the Cholesky factor of the
//! precision matrix, and Monte Carlo covariance estimates built from them.
//!
//! With `theta = L L^T`, a draw is `z = L^{-T} u` for `u ~ N(0, I)`. Normals
//! come from the ziggurat sampler of `rand_distr` driven by ChaCha8, so a
//! seed fixes the whole stream on a given platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::kernels;
use crate::linalg::{cholesky, Dense, SpdFactor, SymMatrix};
use crate::scalar::Scalar;

/// Draws per chunk when accumulating `U U^T` for large batches.
const CHUNK: usize = 512;

/// ChaCha8 generator for `seed`, on an independent `stream`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `(1/n) sum_j z_j z_j^T`.
#[derive(Clone, Debug)]
pub struct SampleCovariance<T> {
    pub matrix: SymMatrix<T>,
    pub n_samples: usize,
}

pub struct GaussianSampler<T> {
    factor: SpdFactor<T>,
    rng: ChaCha8Rng,
}

/// Factors `theta` and seeds a sampler. Fails with `NotPositiveDefinite`
/// when `theta` is not positive definite.
pub fn sampler_from_precision<T: Scalar>(theta: &SymMatrix<T>, seed: u64) -> Result<GaussianSampler<T>> {
    Ok(GaussianSampler::from_factor(cholesky(theta)?, seeded_rng(seed, 0)))
}

pub fn draw_sample_cov<T: Scalar>(sampler: &mut GaussianSampler<T>, n: usize) -> SampleCovariance<T> {
    sampler.sample_covariance(n)
}

impl<T: Scalar> GaussianSampler<T> {
    pub fn from_factor(factor: SpdFactor<T>, rng: ChaCha8Rng) -> Self {
        Self { factor, rng }
    }

    /// Swaps in a new precision factor and keeps the random stream.
    pub fn set_factor(&mut self, factor: SpdFactor<T>) {
        self.factor = factor;
    }

    pub fn factor(&self) -> &SpdFactor<T> {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    /// `p x n` buffer of standard normals; draw `j` is column `j`, filled
    /// in draw order.
    fn normals(&mut self, n: usize) -> Vec<T> {
        let p = self.dim();
        let mut u = vec![T::zero(); p * n];
        for j in 0..n {
            for i in 0..p {
                u[i * n + j] = T::standard_normal(&mut self.rng);
            }
        }
        u
    }

    /// One draw from `N(0, theta^{-1})`.
    pub fn draw(&mut self) -> Vec<T> {
        let mut z = self.normals(1);
        self.factor.solve_transpose_in_place(&mut z, 1);
        z
    }

    /// `n` draws as the rows of an `n x p` matrix.
    pub fn draw_many(&mut self, n: usize) -> Dense<T> {
        let p = self.dim();
        let mut z = self.normals(n);
        self.factor.solve_transpose_in_place(&mut z, n);
        Dense::from_fn(n, p, |j, i| z[i * n + j])
    }

    /// Average of `n` outer products `z z^T`.
    ///
    /// Small batches back-solve every draw and form `Z Z^T / n`. Once
    /// `n >= 4p` it is cheaper to accumulate `G = U U^T` and return
    /// `L^{-T} (G / n) L^{-1}`, which is the same matrix up to rounding.
    pub fn sample_covariance(&mut self, n: usize) -> SampleCovariance<T> {
        assert!(n >= 1, "need at least one draw");
        let p = self.dim();
        let inv_n = T::one() / T::cast(n as f64);
        let mut out = vec![T::zero(); p * p];
        if n < 4 * p {
            let mut z = self.normals(n);
            self.factor.solve_transpose_in_place(&mut z, n);
            kernels::syrk_lower(inv_n, &z, p, n, T::zero(), &mut out);
        } else {
            let mut g = vec![T::zero(); p * p];
            let mut done = 0;
            while done < n {
                let m = CHUNK.min(n - done);
                let u = self.normals(m);
                let beta = if done == 0 { T::zero() } else { T::one() };
                kernels::syrk_lower(inv_n, &u, p, m, beta, &mut g);
                done += m;
            }
            mirror(&mut g, p);
            let linv = self.factor.lower_inverse();
            out = kernels::congruence_lower(linv.as_slice(), &g, p);
        }
        SampleCovariance {
            matrix: SymMatrix::from_symmetric_vec(p, out),
            n_samples: n,
        }
    }
}

fn mirror<T: Scalar>(a: &mut [T], n: usize) {
    for i in 0..n {
        for j in 0..i {
            a[j * n + i] = a[i * n + j];
        }
    }
}
