//! Closed-form solution of the pure ridge problem (`alpha = 0`).
//!
//! Minimizing `-log det theta + Tr(theta S) + (lambda / 2) ||theta||_F^2`
//! gives `-theta^{-1} + S + lambda theta = 0`, so `theta` shares the
//! eigenvectors of `S` and each eigenvalue `d` maps to the positive root of
//! `lambda sigma^2 + d sigma - 1 = 0`.

use crate::data::DatasetMatrix;
use crate::error::{Error, Result};
use crate::linalg::{eigendecompose, Dense, Spectrum, SymMatrix};
use crate::scalar::Scalar;

/// Eigenvalues of the Gram matrix below this fraction of the largest are
/// treated as zero on the data path.
const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct RidgeSolution<T> {
    pub theta_hat: SymMatrix<T>,
    /// One value per eigenvalue of `S`, ascending in the eigenvalue. On the
    /// data path the first `p - r` entries belong to the null space of `X`.
    pub sigma: Vec<T>,
    /// Eigenpairs of `S`. The data path keeps only the `r` nonzero ones.
    pub spectrum_of_s: Spectrum<T>,
}

/// Positive root of `lambda s^2 + d s - 1 = 0`, without cancellation.
pub fn ridge_eigenvalue<T: Scalar>(d: T, lambda: T) -> T {
    let two = T::cast(2.0);
    let r = (d * d + T::cast(4.0) * lambda).sqrt();
    if d >= T::zero() {
        two / (d + r)
    } else {
        (r - d) / (two * lambda)
    }
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda > T::zero() && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")))
    }
}

pub fn solve_ridge_exact<T: Scalar>(s: &SymMatrix<T>, lambda: T) -> Result<RidgeSolution<T>> {
    check_lambda(lambda)?;
    let spectrum_of_s = eigendecompose(s)?;
    let sigma: Vec<T> = spectrum_of_s
        .eigenvalues
        .iter()
        .map(|&d| ridge_eigenvalue(d, lambda))
        .collect();
    let theta_hat = spectrum_of_s.reassemble(|d| ridge_eigenvalue(d, lambda));
    Ok(RidgeSolution {
        theta_hat,
        sigma,
        spectrum_of_s,
    })
}

/// Ridge solution for `S = X^T X / n` from the `n x n` Gram matrix, in
/// `O(n^2 p)` work. Falls back to [`solve_ridge_exact`] when `n >= p`.
pub fn solve_ridge_from_data<T: Scalar>(x: &DatasetMatrix<T>, lambda: T) -> Result<RidgeSolution<T>> {
    check_lambda(lambda)?;
    let (n, p) = (x.n(), x.p());
    if n == 0 || p == 0 {
        return Err(Error::dims("nonempty data matrix", format!("{n}x{p}")));
    }
    if n >= p {
        return solve_ridge_exact(&crate::data::sample_covariance(x, false), lambda);
    }

    let xv = x.values();
    let nf = T::cast(n as f64);
    let gram = SymMatrix::from_lower_of(&xv.matmul(&xv.transpose())?)?.scale(T::one() / nf);
    let g = eigendecompose(&gram)?;
    let dmax = g.eigenvalues.last().copied().unwrap_or(T::zero());
    let keep: Vec<usize> = (0..n)
        .filter(|&k| g.eigenvalues[k] > T::cast(RANK_TOL) * dmax && g.eigenvalues[k] > T::zero())
        .collect();
    let r = keep.len();

    // U_r = X^T V diag(1 / sqrt(n d)), orthonormal columns spanning the row space
    let v = Dense::from_fn(n, r, |i, c| g.eigenvectors.get(i, keep[c]));
    let d: Vec<T> = keep.iter().map(|&k| g.eigenvalues[k]).collect();
    let mut u = xv.transpose().matmul(&v)?;
    for i in 0..p {
        for c in 0..r {
            u.set(i, c, u.get(i, c) / (nf * d[c]).sqrt());
        }
    }

    let base = T::one() / lambda.sqrt();
    let sigma_r: Vec<T> = d.iter().map(|&dk| ridge_eigenvalue(dk, lambda)).collect();
    let weighted = Dense::from_fn(p, r, |i, c| u.get(i, c) * (sigma_r[c] - base));
    let low_rank = weighted.matmul(&u.transpose())?;
    let theta_hat = SymMatrix::from_lower_of(&low_rank)?.add_diag(base);

    let mut sigma = vec![base; p - r];
    sigma.extend_from_slice(&sigma_r);
    Ok(RidgeSolution {
        theta_hat,
        sigma,
        spectrum_of_s: Spectrum {
            eigenvalues: d,
            eigenvectors: u,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cholesky, invert_via_factor};
    use crate::penalty::ElasticNetPenalty;
    use crate::solver::{relative_error, solve_deterministic, DetSolverConfig};
    use crate::testing::random_spd;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_data(n: usize, p: usize, seed: u64) -> DatasetMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DatasetMatrix::new(Dense::from_fn(n, p, |_, _| rng.sample(StandardNormal))).unwrap()
    }

    fn stationarity_gap(theta: &SymMatrix<f64>, s: &SymMatrix<f64>, lambda: f64) -> f64 {
        let inv = invert_via_factor(&cholesky(theta).unwrap());
        let g = s.sub(&inv).add(&theta.scale(lambda));
        g.frobenius_norm() / s.frobenius_norm().max(1e-300)
    }

    #[test]
    fn zero_covariance_gives_scaled_identity() {
        let sol = solve_ridge_exact(&SymMatrix::zeros(3), 1.0).unwrap();
        assert!(sol.theta_hat.sub(&SymMatrix::identity(3)).max_abs() < 1e-15);
        assert!(sol.sigma.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn eigenvalue_three() {
        let sol = solve_ridge_exact(&SymMatrix::from_diag(&[3.0]), 1.0).unwrap();
        assert!((sol.sigma[0] - (13f64.sqrt() - 3.0) / 2.0).abs() < 1e-15);
        assert!((sol.sigma[0] - 0.3027756).abs() < 1e-7);
    }

    #[test]
    fn negative_eigenvalue_root_is_stable() {
        for d in [-1e8f64, -3.0, -1e-9] {
            let s = ridge_eigenvalue(d, 0.5);
            assert!((0.5 * s * s + d * s - 1.0).abs() < 1e-12 * (1.0 + (d * s).abs()));
        }
    }

    #[test]
    fn matches_iterative_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let s = random_spd(30, 0.0, &mut rng);
        let sol = solve_ridge_exact(&s, 0.5).unwrap();
        let pen = ElasticNetPenalty::new(0.5, 0.0).unwrap();
        let cfg = DetSolverConfig {
            rel_tol: 1e-12,
            max_iters: 100_000,
            ..Default::default()
        };
        let det = solve_deterministic(&s, &pen, &cfg).unwrap();
        assert!(det.converged);
        let err = relative_error(&det.theta_hat, &sol.theta_hat);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn zero_data_gives_half_identity() {
        let x = DatasetMatrix::new(Dense::zeros(2, 5)).unwrap();
        let sol = solve_ridge_from_data(&x, 4.0).unwrap();
        assert!(sol.theta_hat.sub(&SymMatrix::identity(5).scale(0.5)).max_abs() < 1e-15);
        assert_eq!(sol.sigma, vec![0.5; 5]);
    }

    #[test]
    fn single_row_spectrum() {
        let x = DatasetMatrix::from_row_major(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let sol = solve_ridge_from_data(&x, 1.0).unwrap();
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let want = SymMatrix::from_diag(&[golden, 1.0, 1.0]);
        assert!(sol.theta_hat.sub(&want).max_abs() < 1e-15);
        assert_eq!(sol.spectrum_of_s.eigenvalues, vec![1.0]);
        assert!((sol.sigma[2] - golden).abs() < 1e-15);
    }

    #[test]
    fn gram_path_matches_dense_path() {
        for seed in 0..3 {
            let x = random_data(5, 20, seed);
            let fast = solve_ridge_from_data(&x, 1.0).unwrap();
            let s = crate::data::sample_covariance(&x, false);
            let dense = solve_ridge_exact(&s, 1.0).unwrap();
            let err = relative_error(&fast.theta_hat, &dense.theta_hat);
            assert!(err < 1e-8, "{err}");
            assert!(stationarity_gap(&fast.theta_hat, &s, 1.0) < 1e-8);
        }
    }

    #[test]
    fn rank_deficient_data() {
        // two identical rows: rank one
        let mut v = vec![0.0; 2 * 6];
        for j in 0..6 {
            v[j] = j as f64 - 2.5;
            v[6 + j] = j as f64 - 2.5;
        }
        let x = DatasetMatrix::from_row_major(2, 6, v).unwrap();
        let fast = solve_ridge_from_data(&x, 0.7).unwrap();
        assert_eq!(fast.spectrum_of_s.eigenvalues.len(), 1);
        let s = crate::data::sample_covariance(&x, false);
        assert!(stationarity_gap(&fast.theta_hat, &s, 0.7) < 1e-10);
    }

    #[test]
    fn tall_data_delegates() {
        let x = random_data(30, 6, 4);
        let fast = solve_ridge_from_data(&x, 0.3).unwrap();
        assert_eq!(fast.spectrum_of_s.eigenvalues.len(), 6);
        let s = crate::data::sample_covariance(&x, false);
        assert!(stationarity_gap(&fast.theta_hat, &s, 0.3) < 1e-10);
    }

    #[test]
    fn rejects_bad_lambda() {
        assert!(solve_ridge_exact(&SymMatrix::<f64>::identity(2), 0.0).is_err());
        assert!(solve_ridge_from_data(&random_data(2, 4, 0), -1.0).is_err());
    }

    proptest! {
        #[test]
        fn sigma_solves_its_quadratic(seed in any::<u64>(), p in 1usize..12, lambda in 1e-3f64..1e2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_spd(p, 0.0, &mut rng);
            let sol = solve_ridge_exact(&s, lambda).unwrap();
            for (&d, &sg) in sol.spectrum_of_s.eigenvalues.iter().zip(&sol.sigma) {
                prop_assert!(sg > 0.0);
                prop_assert!((lambda * sg * sg + d * sg - 1.0).abs() < 1e-12);
            }
            prop_assert!(stationarity_gap(&sol.theta_hat, &s, lambda) < 1e-8);
        }
    }
}
