//! Data matrices, sample covariances, synthetic problems and file formats.

pub mod io;
mod synthetic;

pub use synthetic::{default_density, generate_synthetic, SyntheticProblem};

use crate::error::{Error, Result};
use crate::linalg::kernels;
use crate::linalg::{Dense, SymMatrix};
use crate::scalar::Scalar;

/// `n x p` data matrix, one sample per row.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMatrix<T> {
    values: Dense<T>,
}

impl<T: Scalar> DatasetMatrix<T> {
    pub fn new(values: Dense<T>) -> Result<Self> {
        if !values.all_finite() {
            return Err(Error::InvalidArgument("data matrix has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn from_row_major(n: usize, p: usize, data: Vec<T>) -> Result<Self> {
        Self::new(Dense::from_row_major(n, p, data)?)
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn p(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Dense<T> {
        &self.values
    }

    pub fn into_dense(self) -> Dense<T> {
        self.values
    }
}

/// `(1/n) X^T X`, after subtracting column means when `center` is set.
pub fn sample_covariance<T: Scalar>(x: &DatasetMatrix<T>, center: bool) -> SymMatrix<T> {
    let (n, p) = (x.n(), x.p());
    assert!(n >= 1, "need at least one sample");
    let v = x.values();
    let means: Vec<T> = if center {
        let nf = T::cast(n as f64);
        (0..p).map(|j| (0..n).map(|i| v.get(i, j)).sum::<T>() / nf).collect()
    } else {
        vec![T::zero(); p]
    };
    // p x n, so that X^T X is the Gram matrix of its rows
    let mut xt = vec![T::zero(); p * n];
    for i in 0..n {
        for j in 0..p {
            xt[j * n + i] = v.get(i, j) - means[j];
        }
    }
    let mut out = vec![T::zero(); p * p];
    kernels::syrk_lower(T::one() / T::cast(n as f64), &xt, p, n, T::zero(), &mut out);
    SymMatrix::from_symmetric_vec(p, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigenvalues;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_unit_rows() {
        let x = DatasetMatrix::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(sample_covariance(&x, false), SymMatrix::from_diag(&[0.5, 0.5]));
    }

    #[test]
    fn single_row_is_rank_one() {
        let x = DatasetMatrix::from_row_major(1, 2, vec![2.0, 0.0]).unwrap();
        assert_eq!(sample_covariance(&x, false), SymMatrix::from_diag(&[4.0, 0.0]));
    }

    #[test]
    fn centering_removes_constants() {
        let x = DatasetMatrix::from_row_major(3, 2, vec![1.5, -2.0, 1.5, -2.0, 1.5, -2.0]).unwrap();
        assert_eq!(sample_covariance(&x, true), SymMatrix::zeros(2));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DatasetMatrix::from_row_major(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DatasetMatrix::<f64>::from_row_major(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn covariance_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (n, p) in [(3, 10), (20, 10), (70, 90)] {
            let m = crate::testing::random_sym(n.max(p), &mut rng);
            let x = DatasetMatrix::new(Dense::from_fn(n, p, |i, j| m.get(i, j) + 0.3)).unwrap();
            for center in [false, true] {
                let ev = eigenvalues(&sample_covariance(&x, center)).unwrap();
                assert!(ev[0] >= -1e-10, "{n}x{p}: {}", ev[0]);
            }
        }
    }

    #[test]
    fn matches_naive_sum() {
        let x = DatasetMatrix::<f64>::from_row_major(3, 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, 1.0]).unwrap();
        let s = sample_covariance(&x, false);
        let want01 = (1.0 * 2.0 + -1.0 * 0.5 + 3.0 * 1.0) / 3.0;
        assert!((s.get(0, 1) - want01).abs() < 1e-15);
        assert!((s.get(0, 0) - 11.0 / 3.0).abs() < 1e-15);
    }
}
