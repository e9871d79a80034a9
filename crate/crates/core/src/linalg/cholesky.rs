use super::kernels;
use super::{Dense, SymMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cholesky factor `A = L L^T` of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct SpdFactor<T> {
    lower: Dense<T>,
    log_det: T,
}

impl<T: Scalar> SpdFactor<T> {
    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    /// The lower-triangular factor `L` (strict upper triangle is zero).
    pub fn lower(&self) -> &Dense<T> {
        &self.lower
    }

    /// `log det A = 2 * sum_i log L_ii`.
    pub fn log_det(&self) -> T {
        self.log_det
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> SymMatrix<T> {
        let n = self.dim();
        let mut c = vec![T::zero(); n * n];
        kernels::syrk_lower(T::one(), self.lower.as_slice(), n, n, T::zero(), &mut c);
        SymMatrix::from_symmetric_vec(n, c)
    }

    /// `L^{-1}` (lower triangular).
    pub fn lower_inverse(&self) -> Dense<T> {
        let n = self.dim();
        Dense::from_row_major(n, n, kernels::lower_inverse(self.lower.as_slice(), n))
            .expect("square buffer")
    }

    /// Overwrites the `n x m` row-major block `rhs` with `L^{-T} rhs`.
    pub fn solve_transpose_in_place(&self, rhs: &mut [T], m: usize) {
        kernels::solve_lower_transpose(self.lower.as_slice(), self.dim(), rhs, m);
    }
}

/// Cholesky factorization; fails with [`Error::NotPositiveDefinite`] when a
/// pivot is not strictly positive and finite. This is the positive
/// definiteness test used by every solver.
pub fn cholesky<T: Scalar>(a: &SymMatrix<T>) -> Result<SpdFactor<T>> {
    let n = a.dim();
    let mut buf = a.as_slice().to_vec();
    kernels::cholesky_in_place(&mut buf, n).map_err(|pivot| Error::NotPositiveDefinite { pivot })?;
    let log_det = (0..n).map(|i| buf[i * n + i].ln()).sum::<T>() * T::cast(2.0);
    Ok(SpdFactor {
        lower: Dense::from_row_major(n, n, buf).expect("square buffer"),
        log_det,
    })
}

/// `A^{-1} = L^{-T} L^{-1}`, exactly symmetric (lower triangle mirrored).
pub fn invert_via_factor<T: Scalar>(f: &SpdFactor<T>) -> SymMatrix<T> {
    let n = f.dim();
    let linv = kernels::lower_inverse(f.lower.as_slice(), n);
    SymMatrix::from_symmetric_vec(n, kernels::gram_of_lower(&linv, n))
}
