use super::{Dense, SymMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_QL_SWEEPS: usize = 60;

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns).
#[derive(Clone, Debug)]
pub struct Spectrum<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Dense<T>,
}

impl<T: Scalar> Spectrum<T> {
    /// `U diag(f(d)) U^T`.
    pub fn reassemble(&self, f: impl Fn(T) -> T) -> SymMatrix<T> {
        let n = self.eigenvalues.len();
        let u = &self.eigenvectors;
        let fd: Vec<T> = self.eigenvalues.iter().map(|&d| f(d)).collect();
        let scaled = Dense::from_fn(n, n, |i, k| u.get(i, k) * fd[k]);
        let full = scaled
            .matmul(&u.transpose())
            .expect("square factors");
        SymMatrix::from_lower_of(&full).expect("square")
    }
}

/// Full symmetric eigendecomposition (Householder tridiagonalization
/// followed by implicit QL).
pub fn eigendecompose<T: Scalar>(a: &SymMatrix<T>) -> Result<Spectrum<T>> {
    let n = a.dim();
    let mut z = a.as_slice().to_vec();
    let (mut d, mut e) = tridiagonalize(&mut z, n, true);
    tql(&mut d, &mut e, Some(&mut z), n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));
    let eigenvalues = order.iter().map(|&i| d[i]).collect();
    let eigenvectors = Dense::from_fn(n, n, |r, c| z[r * n + order[c]]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, ascending.
pub fn eigenvalues<T: Scalar>(a: &SymMatrix<T>) -> Result<Vec<T>> {
    let n = a.dim();
    let mut z = a.as_slice().to_vec();
    let (mut d, mut e) = tridiagonalize(&mut z, n, false);
    tql(&mut d, &mut e, None, n)?;
    d.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(d)
}

/// `(lambda_min, lambda_max)`.
pub fn extreme_eigenvalues<T: Scalar>(a: &SymMatrix<T>) -> Result<(T, T)> {
    if a.dim() == 0 {
        return Err(Error::InvalidArgument("empty matrix has no eigenvalues".into()));
    }
    let d = eigenvalues(a)?;
    Ok((d[0], d[d.len() - 1]))
}

/// Householder reduction of the row-major symmetric `z` to tridiagonal form.
/// Returns `(diagonal, subdiagonal)` with `e[i]` coupling `i-1` and `i`.
/// With `want_vectors` the orthogonal transform is accumulated into `z`.
fn tridiagonalize<T: Scalar>(z: &mut [T], n: usize, want_vectors: bool) -> (Vec<T>, Vec<T>) {
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = T::zero();
        if l > 0 {
            let scale: T = (0..i).map(|k| z[i * n + k].abs()).sum();
            if scale == T::zero() {
                e[i] = z[i * n + l];
            } else {
                for k in 0..i {
                    z[i * n + k] /= scale;
                    h += z[i * n + k] * z[i * n + k];
                }
                let f = z[i * n + l];
                let g = if f >= T::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[i * n + l] = f - g;
                let mut f = T::zero();
                for j in 0..i {
                    if want_vectors {
                        z[j * n + i] = z[i * n + j] / h;
                    }
                    let mut g = T::zero();
                    for k in 0..=j {
                        g += z[j * n + k] * z[i * n + k];
                    }
                    for k in j + 1..i {
                        g += z[k * n + j] * z[i * n + k];
                    }
                    e[j] = g / h;
                    f += e[j] * z[i * n + j];
                }
                let hh = f / (h + h);
                for j in 0..i {
                    let f = z[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        z[j * n + k] -= f * e[k] + g * z[i * n + k];
                    }
                }
            }
        } else {
            e[i] = z[i * n + l];
        }
        d[i] = h;
    }
    if n > 0 {
        d[0] = T::zero();
        e[0] = T::zero();
    }
    for i in 0..n {
        if want_vectors {
            if d[i] != T::zero() {
                for j in 0..i {
                    let mut g = T::zero();
                    for k in 0..i {
                        g += z[i * n + k] * z[k * n + j];
                    }
                    for k in 0..i {
                        z[k * n + j] -= g * z[k * n + i];
                    }
                }
            }
            d[i] = z[i * n + i];
            z[i * n + i] = T::one();
            for j in 0..i {
                z[j * n + i] = T::zero();
                z[i * n + j] = T::zero();
            }
        } else {
            d[i] = z[i * n + i];
        }
    }
    (d, e)
}

/// Implicit-shift QL on a tridiagonal matrix; rotations are applied to the
/// columns of `z` when given.
fn tql<T: Scalar>(d: &mut [T], e: &mut [T], mut z: Option<&mut [T]>, n: usize) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let eps = T::epsilon();
    let two = T::cast(2.0);
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(Error::ConvergenceFailure { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let f = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * f;
                        z[k * n + i] = c * z[k * n + i] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::random_sym;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_spectrum() {
        let s = eigendecompose(&SymMatrix::<f64>::identity(4)).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0; 4]);
        let back = s.reassemble(|d| d);
        assert!(back.sub(&SymMatrix::identity(4)).max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_sorted_ascending() {
        let s = eigendecompose(&SymMatrix::from_diag(&[3.0, 1.0])).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 3.0]);
        assert_eq!(extreme_eigenvalues(&SymMatrix::from_diag(&[1.0, 3.0])).unwrap(), (1.0, 3.0));
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = SymMatrix::<f64>::from_lower_fn(2, |i, j| if i == j { 2.0 } else { 1.0 });
        let (lo, hi) = extreme_eigenvalues(&a).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 3.0).abs() < 1e-14);
        assert_eq!(extreme_eigenvalues(&SymMatrix::<f64>::identity(1)).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn random_reconstruction_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [8, 33] {
            let a = random_sym(n, &mut rng);
            let s = eigendecompose(&a).unwrap();
            let back = s.reassemble(|d| d);
            let rel = back.sub(&a).frobenius_norm() / a.frobenius_norm();
            assert!(rel < 1e-8, "n={n} rel={rel}");
            let u = &s.eigenvectors;
            let utu = u.transpose().matmul(u).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((utu.get(i, j) - want).abs() < 1e-10);
                }
            }
            assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let vals = eigenvalues(&a).unwrap();
            for (x, y) in vals.iter().zip(&s.eigenvalues) {
                assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn log_det_matches_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10 {
            let a = crate::testing::random_spd(12, 0.2, &mut rng);
            let ld = crate::linalg::cholesky(&a).unwrap().log_det();
            let from_eig: f64 = eigenvalues(&a).unwrap().iter().map(|d| d.ln()).sum();
            assert!((ld - from_eig).abs() < 1e-8);
        }
    }
}
