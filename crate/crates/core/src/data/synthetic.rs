use rand::Rng;

use super::{sample_covariance, DatasetMatrix};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, extreme_eigenvalues, SymMatrix};
use crate::sampler::{seeded_rng, GaussianSampler};
use crate::scalar::Scalar;

/// Sparse ground-truth precision matrix, a Gaussian sample from it and the
/// sample covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticProblem<T> {
    pub theta_star: SymMatrix<T>,
    pub x: DatasetMatrix<T>,
    pub s: SymMatrix<T>,
    pub seed: u64,
    pub density: f64,
    pub magnitude: f64,
    pub ell: f64,
}

/// Off-diagonal nonzero proportion `10 / p`, capped at 1.
pub fn default_density(p: usize) -> f64 {
    (10.0 / p as f64).min(1.0)
}

/// Draws a sparse symmetric `B` (each off-diagonal pair nonzero with
/// probability `density`, values standard normal pushed away from zero by
/// `magnitude`), sets `theta_star = B + (ell - lambda_min(B)) I`, and draws
/// `ceil(p / 2)` samples from `N(0, theta_star^{-1})`.
pub fn generate_synthetic<T: Scalar>(
    p: usize,
    density: f64,
    magnitude: f64,
    ell: f64,
    seed: u64,
) -> Result<SyntheticProblem<T>> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("need p >= 2, got {p}")));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!("density must lie in (0, 1], got {density}")));
    }
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(Error::InvalidArgument(format!("ell must be positive, got {ell}")));
    }
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::InvalidArgument(format!("magnitude must be >= 0, got {magnitude}")));
    }

    let mut rng = seeded_rng(seed, 1);
    let mag = T::cast(magnitude);
    let mut b = SymMatrix::zeros(p);
    for i in 1..p {
        for j in 0..i {
            if rng.random::<f64>() < density {
                let v = T::standard_normal(&mut rng);
                b.set(i, j, if v >= T::zero() { v + mag } else { v - mag });
            }
        }
    }
    let (bmin, _) = extreme_eigenvalues(&b)?;
    let theta_star = b.add_diag(T::cast(ell) - bmin);

    let n = p.div_ceil(2);
    let mut sampler = GaussianSampler::from_factor(cholesky(&theta_star)?, seeded_rng(seed, 2));
    let x = DatasetMatrix::new(sampler.draw_many(n))?;
    let s = sample_covariance(&x, false);
    Ok(SyntheticProblem {
        theta_star,
        x,
        s,
        seed,
        density,
        magnitude,
        ell,
    })
}
