//! Elastic-net penalty, its proximal operator, the penalized objective and
//! the KKT stationarity residual.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, invert_via_factor, SpdFactor, SymMatrix};
use crate::scalar::Scalar;

/// Support classification threshold for [`kkt_residual`].
pub const KKT_ZERO_TOL: f64 = 1e-12;

/// `g(theta) = sum_ij (lambda1 |theta_ij| + lambda2 theta_ij^2)` with
/// `lambda1 = alpha * lambda` and `lambda2 = (1 - alpha) * lambda / 2`.
///
/// Diagonal entries are penalized like any other entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticNetPenalty<T> {
    lambda: T,
    alpha: T,
    lambda1: T,
    lambda2: T,
}

impl<T: Scalar> ElasticNetPenalty<T> {
    /// Requires `lambda > 0` and `alpha` in `[0, 1]`.
    pub fn new(lambda: T, alpha: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(Self::new_unchecked(lambda, alpha))
    }

    /// Same formulas without validation. `lambda = 0` is allowed here and
    /// yields the unpenalized likelihood; nothing else in the crate relies
    /// on uniqueness through this constructor.
    pub fn new_unchecked(lambda: T, alpha: T) -> Self {
        Self {
            lambda,
            alpha,
            lambda1: alpha * lambda,
            lambda2: (T::one() - alpha) * lambda / T::cast(2.0),
        }
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// l1 weight `alpha * lambda`.
    pub fn lambda1(&self) -> T {
        self.lambda1
    }

    /// squared-l2 weight `(1 - alpha) * lambda / 2`.
    pub fn lambda2(&self) -> T {
        self.lambda2
    }

    /// Scalar proximal map: soft-threshold by `lambda1 * gamma`, then shrink
    /// by `1 + 2 * lambda2 * gamma`.
    #[inline]
    pub fn prox_scalar(&self, x: T, gamma: T) -> T {
        let thr = self.lambda1 * gamma;
        let shrink = T::one() + T::cast(2.0) * self.lambda2 * gamma;
        if x.abs() < thr {
            T::zero()
        } else if x >= T::zero() {
            (x - thr) / shrink
        } else {
            (x + thr) / shrink
        }
    }
}

/// Entrywise proximal operator of `gamma * g`.
pub fn prox<T: Scalar>(theta: &SymMatrix<T>, gamma: T, pen: &ElasticNetPenalty<T>) -> SymMatrix<T> {
    theta.map(|x| pen.prox_scalar(x, gamma))
}

pub fn penalty_value<T: Scalar>(theta: &SymMatrix<T>, pen: &ElasticNetPenalty<T>) -> T {
    theta
        .as_slice()
        .iter()
        .map(|&x| pen.lambda1 * x.abs() + pen.lambda2 * x * x)
        .sum()
}

/// `-log det theta + Tr(theta S) + g(theta)`, or `+inf` when `theta` is not
/// positive definite.
pub fn objective<T: Scalar>(theta: &SymMatrix<T>, s: &SymMatrix<T>, pen: &ElasticNetPenalty<T>) -> T {
    match cholesky(theta) {
        Ok(f) => objective_with_factor(theta, &f, s, pen),
        Err(_) => T::infinity(),
    }
}

/// Objective when the factor of `theta` is already known.
pub fn objective_with_factor<T: Scalar>(
    theta: &SymMatrix<T>,
    factor: &SpdFactor<T>,
    s: &SymMatrix<T>,
    pen: &ElasticNetPenalty<T>,
) -> T {
    -factor.log_det() + theta.dot(s) + penalty_value(theta, pen)
}

/// Largest violation of `-theta^{-1} + S + 2 lambda2 theta + lambda1 Z = 0`
/// over valid subgradients `Z` of `|.|`.
///
/// Entries with `|theta_ij| > zero_tol` are treated as on the support.
pub fn kkt_residual<T: Scalar>(
    theta: &SymMatrix<T>,
    s: &SymMatrix<T>,
    pen: &ElasticNetPenalty<T>,
    zero_tol: T,
) -> Result<T> {
    let inv = invert_via_factor(&cholesky(theta)?);
    Ok(kkt_residual_with_inverse(theta, &inv, s, pen, zero_tol))
}

pub(crate) fn kkt_residual_with_inverse<T: Scalar>(
    theta: &SymMatrix<T>,
    inv: &SymMatrix<T>,
    s: &SymMatrix<T>,
    pen: &ElasticNetPenalty<T>,
    zero_tol: T,
) -> T {
    let two_l2 = T::cast(2.0) * pen.lambda2;
    let mut worst = T::zero();
    for ((&t, &i), &sv) in theta.as_slice().iter().zip(inv.as_slice()).zip(s.as_slice()) {
        let g = -i + sv + two_l2 * t;
        let v = if t.abs() > zero_tol {
            (g + pen.lambda1 * t.signum()).abs()
        } else {
            (g.abs() - pen.lambda1).max(T::zero())
        };
        worst = worst.max(v);
    }
    worst
}
