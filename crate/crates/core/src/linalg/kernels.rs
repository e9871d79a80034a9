//! Blocked dense kernels on row-major buffers. Level-3 work is routed
//! through `Scalar::gemm`; only the small diagonal blocks run scalar loops.

use crate::scalar::Scalar;

pub(crate) const NB: usize = 64;

/// Strided read-only view into a buffer.
#[derive(Clone, Copy)]
pub(crate) struct View<'a, T> {
    data: &'a [T],
    offset: usize,
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a, T: Scalar> View<'a, T> {
    pub(crate) fn row_major(data: &'a [T], rows: usize, cols: usize) -> Self {
        Self {
            data,
            offset: 0,
            rows,
            cols,
            rs: cols as isize,
            cs: 1,
        }
    }

    #[allow(dead_code)]
    pub(crate) fn t(self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
            ..self
        }
    }

    fn check(&self) {
        if self.rows > 0 && self.cols > 0 {
            let last = self.offset as isize
                + (self.rows as isize - 1) * self.rs
                + (self.cols as isize - 1) * self.cs;
            assert!(last >= 0 && (last as usize) < self.data.len(), "view out of bounds");
        }
    }
}

/// `C <- alpha * A * B + beta * C` with `C` row-major with leading dimension `ldc`.
pub(crate) fn gemm_into<T: Scalar>(
    alpha: T,
    a: View<'_, T>,
    b: View<'_, T>,
    beta: T,
    c: &mut [T],
    ldc: usize,
) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    a.check();
    b.check();
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    assert!((m - 1) * ldc + n <= c.len(), "output out of bounds");
    // SAFETY: bounds checked above; `c` is a distinct &mut borrow.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr().add(a.offset),
            a.rs,
            a.cs,
            b.data.as_ptr().add(b.offset),
            b.rs,
            b.cs,
            beta,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}

fn blocks(n: usize) -> impl DoubleEndedIterator<Item = (usize, usize)> {
    (0..n.div_ceil(NB)).map(move |b| (b * NB, ((b + 1) * NB).min(n)))
}

/// In-place lower Cholesky of a row-major `n x n` buffer. On success the
/// lower triangle holds `L` and the strict upper triangle is zeroed. On
/// failure returns the index of the offending pivot.
pub(crate) fn cholesky_in_place<T: Scalar>(a: &mut [T], n: usize) -> Result<(), usize> {
    assert_eq!(a.len(), n * n);
    for (k0, k1) in blocks(n) {
        // diagonal block; columns left of k0 were already folded in by the
        // trailing updates of earlier panels
        for j in k0..k1 {
            let mut d = a[j * n + j];
            for k in k0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(j);
            }
            let ljj = d.sqrt();
            a[j * n + j] = ljj;
            for i in j + 1..k1 {
                let mut v = a[i * n + j];
                for k in k0..j {
                    v -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = v / ljj;
            }
        }
        // panel below the diagonal block: A21 <- A21 * L11^{-T}
        for i in k1..n {
            for j in k0..k1 {
                let mut v = a[i * n + j];
                for k in k0..j {
                    v -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = v / a[j * n + j];
            }
        }
        // trailing lower update A22 <- A22 - L21 * L21^T, one block row at a time
        let kb = k1 - k0;
        let mut i0 = k1;
        while i0 < n {
            let i1 = (i0 + NB).min(n);
            let p = a.as_mut_ptr();
            // SAFETY: the written block (rows i0..i1, cols k1..i1) and the
            // read panels (cols k0..k1) are disjoint regions of `a`.
            unsafe {
                T::gemm(
                    i1 - i0,
                    kb,
                    i1 - k1,
                    -T::one(),
                    p.add(i0 * n + k0),
                    n as isize,
                    1,
                    p.add(k1 * n + k0),
                    1,
                    n as isize,
                    T::one(),
                    p.add(i0 * n + k1),
                    n as isize,
                    1,
                );
            }
            i0 = i1;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            a[i * n + j] = T::zero();
        }
    }
    Ok(())
}

/// Inverse of a lower-triangular matrix (result is lower triangular).
pub(crate) fn lower_inverse<T: Scalar>(l: &[T], n: usize) -> Vec<T> {
    let mut x = vec![T::zero(); n * n];
    for (b0, b1) in blocks(n) {
        for j in b0..b1 {
            x[j * n + j] = T::one() / l[j * n + j];
            for i in j + 1..b1 {
                let mut acc = T::zero();
                for k in j..i {
                    acc += l[i * n + k] * x[k * n + j];
                }
                x[i * n + j] = -acc / l[i * n + i];
            }
        }
    }
    let bl: Vec<_> = blocks(n).collect();
    let mut tmp = vec![T::zero(); NB * NB];
    for (jb, &(j0, j1)) in bl.iter().enumerate() {
        for &(i0, i1) in &bl[jb + 1..] {
            let (ib, w) = (i1 - i0, j1 - j0);
            let xp = x.as_mut_ptr();
            // SAFETY: reads rows j0..i0 and the diagonal block (cols i0..i1);
            // writes rows i0..i1 cols j0..j1. Regions are disjoint.
            unsafe {
                T::gemm(
                    ib,
                    i0 - j0,
                    w,
                    T::one(),
                    l.as_ptr().add(i0 * n + j0),
                    n as isize,
                    1,
                    xp.add(j0 * n + j0),
                    n as isize,
                    1,
                    T::zero(),
                    tmp.as_mut_ptr(),
                    w as isize,
                    1,
                );
                T::gemm(
                    ib,
                    ib,
                    w,
                    -T::one(),
                    xp.add(i0 * n + i0),
                    n as isize,
                    1,
                    tmp.as_ptr(),
                    w as isize,
                    1,
                    T::zero(),
                    xp.add(i0 * n + j0),
                    n as isize,
                    1,
                );
            }
        }
    }
    x
}

/// `X^T X` for lower-triangular `X`; only the lower triangle of the result
/// is meaningful (callers mirror it).
pub(crate) fn gram_of_lower<T: Scalar>(x: &[T], n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); n * n];
    let bl: Vec<_> = blocks(n).collect();
    for (ib, &(i0, i1)) in bl.iter().enumerate() {
        for &(j0, j1) in &bl[..=ib] {
            // C[I,J] = sum_{K >= I} X[K,I]^T X[K,J]
            // SAFETY: `x` and `c` are distinct buffers; shapes fit within n x n.
            unsafe {
                T::gemm(
                    i1 - i0,
                    n - i0,
                    j1 - j0,
                    T::one(),
                    x.as_ptr().add(i0 * n + i0),
                    1,
                    n as isize,
                    x.as_ptr().add(i0 * n + j0),
                    n as isize,
                    1,
                    T::zero(),
                    c.as_mut_ptr().add(i0 * n + j0),
                    n as isize,
                    1,
                );
            }
        }
    }
    c
}

/// Solves `L^T Z = U` in place; `z` is `n x m` row-major and holds `U` on entry.
pub(crate) fn solve_lower_transpose<T: Scalar>(l: &[T], n: usize, z: &mut [T], m: usize) {
    assert_eq!(z.len(), n * m);
    for (i0, i1) in blocks(n).rev() {
        if i1 < n {
            let zp = z.as_mut_ptr();
            // SAFETY: writes rows i0..i1 of z, reads rows i1..n of z.
            unsafe {
                T::gemm(
                    i1 - i0,
                    n - i1,
                    m,
                    -T::one(),
                    l.as_ptr().add(i1 * n + i0),
                    1,
                    n as isize,
                    zp.add(i1 * m),
                    m as isize,
                    1,
                    T::one(),
                    zp.add(i0 * m),
                    m as isize,
                    1,
                );
            }
        }
        for i in (i0..i1).rev() {
            let (head, tail) = z.split_at_mut((i + 1) * m);
            let row_i = &mut head[i * m..];
            for k in i + 1..i1 {
                let lki = l[k * n + i];
                let row_k = &tail[(k - i - 1) * m..(k - i) * m];
                for (zi, &zk) in row_i.iter_mut().zip(row_k) {
                    *zi -= lki * zk;
                }
            }
            let inv = T::one() / l[i * n + i];
            for zi in row_i.iter_mut() {
                *zi *= inv;
            }
        }
    }
}

/// Lower blocks of `C <- alpha * A A^T + beta * C` for `A` `n x m` row-major.
pub(crate) fn syrk_lower<T: Scalar>(alpha: T, a: &[T], n: usize, m: usize, beta: T, c: &mut [T]) {
    assert_eq!(a.len(), n * m);
    assert_eq!(c.len(), n * n);
    let bl: Vec<_> = blocks(n).collect();
    for (ib, &(i0, i1)) in bl.iter().enumerate() {
        for &(j0, j1) in &bl[..=ib] {
            // SAFETY: `a` and `c` are distinct buffers.
            unsafe {
                T::gemm(
                    i1 - i0,
                    m,
                    j1 - j0,
                    alpha,
                    a.as_ptr().add(i0 * m),
                    m as isize,
                    1,
                    a.as_ptr().add(j0 * m),
                    1,
                    m as isize,
                    beta,
                    c.as_mut_ptr().add(i0 * n + j0),
                    n as isize,
                    1,
                );
            }
        }
    }
}

/// Lower blocks of `X^T G X` for lower-triangular `X` and symmetric `G`
/// (both `n x n`, `g` full).
pub(crate) fn congruence_lower<T: Scalar>(x: &[T], g: &[T], n: usize) -> Vec<T> {
    let mut h = vec![T::zero(); n * n];
    gemm_into(
        T::one(),
        View::row_major(g, n, n),
        View::row_major(x, n, n),
        T::zero(),
        &mut h,
        n,
    );
    let mut c = vec![T::zero(); n * n];
    let bl: Vec<_> = blocks(n).collect();
    for (ib, &(i0, i1)) in bl.iter().enumerate() {
        for &(j0, j1) in &bl[..=ib] {
            // SAFETY: distinct buffers, in-bounds shapes.
            unsafe {
                T::gemm(
                    i1 - i0,
                    n - i0,
                    j1 - j0,
                    T::one(),
                    x.as_ptr().add(i0 * n + i0),
                    1,
                    n as isize,
                    h.as_ptr().add(i0 * n + j0),
                    n as isize,
                    1,
                    T::zero(),
                    c.as_mut_ptr().add(i0 * n + j0),
                    n as isize,
                    1,
                );
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
        let mut c = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                c[i * m + j] = (0..k).map(|t| a[i * k + t] * b[t * m + j]).sum();
            }
        }
        c
    }

    fn random_lower(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                l[i * n + j] = rng.random_range(-0.3..0.3);
            }
            l[i * n + i] = rng.random_range(0.5..2.0);
        }
        l
    }

    // sizes straddle the block size so the blocked paths are exercised
    const SIZES: [usize; 4] = [1, 7, 64, 150];

    #[test]
    fn blocked_cholesky_reproduces_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in SIZES {
            let l = random_lower(n, &mut rng);
            let lt: Vec<f64> = (0..n * n).map(|t| l[(t % n) * n + t / n]).collect();
            let a = naive_matmul(&l, &lt, n, n, n);
            let mut f = a.clone();
            cholesky_in_place(&mut f, n).unwrap();
            for t in 0..n * n {
                assert!((f[t] - l[t]).abs() < 1e-10, "n={n} t={t}");
            }
        }
    }

    #[test]
    fn lower_inverse_and_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in SIZES {
            let l = random_lower(n, &mut rng);
            let x = lower_inverse(&l, n);
            let prod = naive_matmul(&l, &x, n, n, n);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((prod[i * n + j] - want).abs() < 1e-9, "n={n}");
                }
            }
            let g = gram_of_lower(&x, n);
            let xt: Vec<f64> = (0..n * n).map(|t| x[(t % n) * n + t / n]).collect();
            let want = naive_matmul(&xt, &x, n, n, n);
            for i in 0..n {
                for j in 0..=i {
                    assert!((g[i * n + j] - want[i * n + j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn transpose_solve_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in SIZES {
            let m = 5;
            let l = random_lower(n, &mut rng);
            let u: Vec<f64> = (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut z = u.clone();
            solve_lower_transpose(&l, n, &mut z, m);
            // check L^T z = u
            let lt: Vec<f64> = (0..n * n).map(|t| l[(t % n) * n + t / n]).collect();
            let back = naive_matmul(&lt, &z, n, n, m);
            for t in 0..n * m {
                assert!((back[t] - u[t]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn syrk_and_congruence_lower_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in SIZES {
            let m = 9;
            let a: Vec<f64> = (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut c = vec![0.0; n * n];
            syrk_lower(1.0, &a, n, m, 0.0, &mut c);
            let at: Vec<f64> = (0..n * m).map(|t| a[(t % n) * m + t / n]).collect();
            let want = naive_matmul(&a, &at, n, m, n);
            for i in 0..n {
                for j in 0..=i {
                    assert!((c[i * n + j] - want[i * n + j]).abs() < 1e-10);
                }
            }
            let x = random_lower(n, &mut rng);
            let g: Vec<f64> = (0..n * n)
                .map(|t| want[t] + if t % (n + 1) == 0 { 1.0 } else { 0.0 })
                .collect();
            let got = congruence_lower(&x, &g, n);
            let xt: Vec<f64> = (0..n * n).map(|t| x[(t % n) * n + t / n]).collect();
            let full = naive_matmul(&naive_matmul(&xt, &g, n, n, n), &x, n, n, n);
            for i in 0..n {
                for j in 0..=i {
                    assert!((got[i * n + j] - full[i * n + j]).abs() < 1e-8);
                }
            }
        }
    }
}
