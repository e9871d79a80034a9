//! Dense symmetric linear algebra: storage, Cholesky, inversion and the
//! symmetric eigensolver.

mod cholesky;
mod eigen;
pub(crate) mod kernels;

pub use cholesky::{cholesky, invert_via_factor, SpdFactor};
pub use eigen::{eigendecompose, eigenvalues, extreme_eigenvalues, Spectrum};

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix of arbitrary shape.
#[derive(Clone, PartialEq)]
pub struct Dense<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                format!("{} values for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &Dense<T>) -> Result<Dense<T>> {
        if self.cols != rhs.rows {
            return Err(Error::dims(
                format!("{} rows on the right", self.cols),
                rhs.rows,
            ));
        }
        let mut out = Dense::zeros(self.rows, rhs.cols);
        kernels::gemm_into(
            T::one(),
            kernels::View::row_major(&self.data, self.rows, self.cols),
            kernels::View::row_major(&rhs.data, rhs.rows, rhs.cols),
            T::zero(),
            &mut out.data,
            rhs.cols,
        );
        Ok(out)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<T: fmt::Debug> fmt::Debug for Dense<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Dense {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

/// Dense symmetric `p x p` matrix.
///
/// Both triangles are stored, but every write goes through [`SymMatrix::set`]
/// (or a constructor that reads one triangle only), so `a[i][j] == a[j][i]`
/// holds bitwise at all times.
#[derive(Clone, PartialEq)]
pub struct SymMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![T::one(); dim])
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * m.dim + i] = d;
        }
        m
    }

    /// Builds a matrix from the lower triangle `f(i, j)`, `j <= i`.
    pub fn from_lower_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Takes the lower triangle of a square matrix and mirrors it.
    pub fn from_lower_of(dense: &Dense<T>) -> Result<Self> {
        if dense.rows() != dense.cols() {
            return Err(Error::dims(
                "square matrix",
                format!("{}x{}", dense.rows(), dense.cols()),
            ));
        }
        Ok(Self::from_lower_fn(dense.rows(), |i, j| dense.get(i, j)))
    }

    /// Accepts a square matrix whose asymmetry is at most `tol` (relative to
    /// `max(1, max|a_ij|)`) and returns its symmetric part.
    pub fn from_dense_checked(dense: &Dense<T>, tol: f64) -> Result<Self> {
        let n = dense.rows();
        if n != dense.cols() {
            return Err(Error::dims("square matrix", format!("{n}x{}", dense.cols())));
        }
        let scale = dense
            .as_slice()
            .iter()
            .fold(1.0f64, |acc, v| acc.max(v.to_f64_lossy().abs()));
        for i in 0..n {
            for j in 0..i {
                let gap = (dense.get(i, j) - dense.get(j, i)).to_f64_lossy().abs();
                if !(gap <= tol * scale) {
                    return Err(Error::NotSymmetric { row: i, col: j, gap });
                }
            }
        }
        let half = T::cast(0.5);
        Ok(Self::from_lower_fn(n, |i, j| {
            if i == j {
                dense.get(i, i)
            } else {
                (dense.get(i, j) + dense.get(j, i)) * half
            }
        }))
    }

    /// Wraps a full buffer that is already exactly symmetric.
    pub(crate) fn from_symmetric_vec(dim: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        let mut m = Self { dim, data };
        m.mirror_lower();
        m
    }

    /// Entrywise `self = f(self, b, c)`; symmetric because every operand is.
    pub(crate) fn zip3_in_place(&mut self, b: &Self, c: &Self, f: impl Fn(T, T, T) -> T) {
        assert!(b.dim == self.dim && c.dim == self.dim, "dimension mismatch");
        for ((x, &y), &z) in self.data.iter_mut().zip(&b.data).zip(&c.data) {
            *x = f(*x, y, z);
        }
    }

    /// Copies the lower triangle over the upper one.
    pub(crate) fn mirror_lower(&mut self) {
        let n = self.dim;
        for i in 0..n {
            for j in 0..i {
                self.data[j * n + i] = self.data[i * n + j];
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    /// Writes `v` at `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    /// Full row-major view of the entries (both triangles).
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_dense(&self) -> Dense<T> {
        Dense {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Applies `f` to every entry. Symmetry is preserved because equal
    /// inputs map to equal outputs.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Entrywise `f(self_ij, other_ij)`.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in zip_map");
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    /// `self + c * I`.
    pub fn add_diag(&self, c: T) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            out.data[i * self.dim + i] += c;
        }
        out
    }

    /// Inner product `Tr(self * other)` (both symmetric).
    pub fn dot(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim, "dimension mismatch in dot");
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Sum of absolute values over all `p^2` entries.
    pub fn l1_norm(&self) -> T {
        self.data.iter().map(|v| v.abs()).sum()
    }

    /// Count of entries (both triangles) with `|a_ij| > tol`.
    pub fn nnz(&self, tol: T) -> usize {
        self.data.iter().filter(|v| v.abs() > tol).count()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Principal submatrix on the given (sorted or not) index set.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_lower_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// Symmetric permutation `P A P'` with `out[i][j] = a[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dim);
        self.submatrix(perm)
    }

    /// Matrix product `self * rhs` for a general right-hand side.
    pub fn matmul(&self, rhs: &Dense<T>) -> Result<Dense<T>> {
        if self.dim != rhs.rows() {
            return Err(Error::dims(format!("{} rows", self.dim), rhs.rows()));
        }
        let mut out = Dense::zeros(self.dim, rhs.cols());
        kernels::gemm_into(
            T::one(),
            kernels::View::row_major(&self.data, self.dim, self.dim),
            kernels::View::row_major(rhs.as_slice(), rhs.rows(), rhs.cols()),
            T::zero(),
            out.as_mut_slice(),
            rhs.cols(),
        );
        Ok(out)
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> SymMatrix<U> {
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| U::cast(v.to_f64_lossy())).collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for SymMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SymMatrix {}x{} [", self.dim, self.dim)?;
        for i in 0..self.dim {
            writeln!(f, "  {:?}", &self.data[i * self.dim..(i + 1) * self.dim])?;
        }
        write!(f, "]")
    }
}
