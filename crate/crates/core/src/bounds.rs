//! A priori spectral bounds for the penalized estimator and for the
//! proximal gradient iterates, the guaranteed-safe step size and the
//! stochastic iteration budget.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, extreme_eigenvalues, invert_via_factor, SymMatrix};
use crate::penalty::ElasticNetPenalty;
use crate::scalar::Scalar;

/// Spectral box for the solution and the iterates.
///
/// `psi_star1` (and, when `lambda1 = 0`, `u1`, `u2`, `psi_ub`) may be `+inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralBounds<T> {
    /// `||S||_2 + lambda1 * p`
    pub mu: T,
    /// `lambda_min(S) - lambda1 * p`
    pub nu: T,
    /// lower bound on `lambda_min` of the solution and of every iterate
    pub ell_star: T,
    pub u1: T,
    pub u2: T,
    /// upper bound on `lambda_max` of the solution, `min(u1, u2)`
    pub psi_ub: T,
    pub psi_star1: T,
    /// upper bound on `lambda_max` of the iterates
    pub psi_star: T,
    /// `psi_ub / ell_star`, an upper bound on the solution's condition number
    pub cond_ub: T,
}

/// Positive root of `2 l2 x^2 + m x - 1 = 0`, i.e. `(-m + sqrt(m^2 + 8 l2)) / (4 l2)`,
/// written to avoid cancellation. With `l2 = 0` this is `1 / m` (or `+inf`
/// when `m <= 0`).
pub(crate) fn quadratic_root<T: Scalar>(m: T, l2: T) -> T {
    let disc = (m * m + T::cast(8.0) * l2).sqrt();
    if m > T::zero() {
        T::cast(2.0) / (m + disc)
    } else if l2 > T::zero() {
        (disc - m) / (T::cast(4.0) * l2)
    } else {
        T::infinity()
    }
}

/// `c(t)` from the upper-bound family; any value is a valid upper bound on
/// `lambda_max` of the solution. Returns `+inf` when `lambda1 = 0` or when
/// `S + t lambda1 I` cannot be factored.
pub fn bound_curve<T: Scalar>(s: &SymMatrix<T>, pen: &ElasticNetPenalty<T>, ell_star: T, t: T) -> T {
    let (l1, l2) = (pen.lambda1(), pen.lambda2());
    if l1 <= T::zero() {
        return T::infinity();
    }
    let theta_t = match cholesky(&s.add_diag(t * l1)) {
        Ok(f) => invert_via_factor(&f),
        Err(_) => return T::infinity(),
    };
    let p = T::cast(s.dim() as f64);
    let denom = l1 * (T::one() - t);
    let fro2 = theta_t.dot(&theta_t);
    (l1 * theta_t.l1_norm() - t * l1 * theta_t.trace() + l2 * fro2 - l2 * ell_star * ell_star * p) / denom
}

const GRID_STEP: f64 = 0.02;
const GOLDEN_WIDTH: f64 = 1e-4;

/// Minimizes `c(t)` over `(0, 1)`: grid `{0.02, ..., 0.98}` then golden
/// section around the best grid point.
fn minimize_bound_curve<T: Scalar>(s: &SymMatrix<T>, pen: &ElasticNetPenalty<T>, ell_star: T) -> T {
    if pen.lambda1() <= T::zero() {
        return T::infinity();
    }
    let c = |t: f64| bound_curve(s, pen, ell_star, T::cast(t)).to_f64_lossy();
    let grid: Vec<(f64, f64)> = (1..50)
        .map(|k| {
            let t = GRID_STEP * k as f64;
            (t, c(t))
        })
        .collect();
    let &(t_best, mut best) = grid
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    let (mut a, mut b) = ((t_best - GRID_STEP).max(1e-6), (t_best + GRID_STEP).min(1.0 - 1e-6));
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (c(x1), c(x2));
    while b - a > GOLDEN_WIDTH {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = c(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = c(x2);
        }
        best = best.min(f1).min(f2);
    }
    T::cast(best)
}

pub fn compute_bounds<T: Scalar>(s: &SymMatrix<T>, pen: &ElasticNetPenalty<T>) -> Result<SpectralBounds<T>> {
    let p = s.dim();
    let pf = T::cast(p as f64);
    let (smin, smax) = extreme_eigenvalues(s)?;
    let (l1, l2) = (pen.lambda1(), pen.lambda2());
    let norm2 = smax.abs().max(smin.abs());
    let mu = norm2 + l1 * pf;
    let nu = smin - l1 * pf;
    let ell_star = quadratic_root(mu, l2);
    let psi_star1 = quadratic_root(nu, l2);
    let u1 = if l1 > T::zero() {
        (pf - ell_star * s.trace() - T::cast(2.0) * pf * l2 * ell_star * ell_star) / l1
    } else {
        T::infinity()
    };
    let u2 = minimize_bound_curve(s, pen, ell_star);
    let psi_ub = u1.min(u2);
    let psi_star = psi_star1.min(psi_ub + pf.sqrt() * (psi_ub - ell_star));
    Ok(SpectralBounds {
        mu,
        nu,
        ell_star,
        u1,
        u2,
        psi_ub,
        psi_star1,
        psi_star,
        cond_ub: psi_ub / ell_star,
    })
}

/// The step size for which the iterates provably stay in the spectral box.
pub fn default_step<T: Scalar>(b: &SpectralBounds<T>) -> T {
    b.ell_star * b.ell_star
}

/// Iterations needed for the stochastic solver with batch exponent `q` to
/// reach mean squared error `epsilon` when the iterates live in the box
/// `[ell, psi]`:
/// `max((psi^2 / ell^2 / epsilon)^(1/q), log(1/epsilon) / log(1/rho))`,
/// `rho = 1 - ell^2 / psi^2`. When `ell == psi` the contraction is exact in
/// one step and only the first term applies.
pub fn iteration_budget(ell: f64, psi: f64, epsilon: f64, q: f64) -> Result<u64> {
    if !(ell > 0.0 && ell <= psi && psi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < ell <= psi < inf, got ell={ell}, psi={psi}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(q > 1.0) {
        return Err(Error::InvalidArgument(format!("q must exceed 1, got {q}")));
    }
    let ratio = (psi / ell).powi(2);
    let sampling = (ratio / epsilon).powf(1.0 / q);
    let rho = 1.0 - 1.0 / ratio;
    let contraction = if rho > 0.0 {
        (1.0 / epsilon).ln() / (1.0 / rho).ln()
    } else {
        0.0
    };
    Ok(sampling.max(contraction).ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pen(lambda: f64, alpha: f64) -> ElasticNetPenalty<f64> {
        ElasticNetPenalty::new(lambda, alpha).unwrap()
    }

    #[test]
    fn scalar_problem_bounds_are_tight() {
        let b = compute_bounds(&SymMatrix::from_diag(&[1.0]), &pen(1.0, 1.0)).unwrap();
        assert!((b.mu - 2.0).abs() < 1e-15);
        assert!((b.ell_star - 0.5).abs() < 1e-15);
        assert!((b.u1 - 0.5).abs() < 1e-15);
        assert!(b.psi_ub <= 0.5 + 1e-15);
        assert!(b.psi_ub >= b.ell_star - 1e-15);
    }

    #[test]
    fn glasso_with_nonpositive_nu_has_infinite_psi_star1() {
        let b = compute_bounds(&SymMatrix::identity(2), &pen(0.5, 1.0)).unwrap();
        assert!((b.mu - 2.0).abs() < 1e-15);
        assert!((b.ell_star - 0.5).abs() < 1e-15);
        assert_eq!(b.nu, 0.0);
        assert_eq!(b.psi_star1, f64::INFINITY);
        assert!(b.psi_star.is_finite());
    }

    #[test]
    fn ridge_lower_bound_is_quadratic_root() {
        let b = compute_bounds(&SymMatrix::identity(2), &pen(1.0, 0.0)).unwrap();
        assert!((b.mu - 1.0).abs() < 1e-15);
        assert!((b.ell_star - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        assert!((b.ell_star - 0.618034).abs() < 1e-6);
        // without an l1 part only the psi_star1 route bounds the iterates
        assert_eq!(b.psi_ub, f64::INFINITY);
        assert!((b.psi_star - b.psi_star1).abs() < 1e-15);
    }

    #[test]
    fn default_step_values() {
        let mut b = compute_bounds(&SymMatrix::from_diag(&[1.0]), &pen(1.0, 1.0)).unwrap();
        assert!((default_step(&b) - 0.25).abs() < 1e-15);
        b.ell_star = 1.0;
        assert_eq!(default_step(&b), 1.0);
        b.ell_star = (5f64.sqrt() - 1.0) / 2.0;
        assert!((default_step(&b) - 0.381966).abs() < 1e-6);
    }

    #[test]
    fn iteration_budget_examples() {
        assert_eq!(iteration_budget(1.0, 2.0, 0.01, 2.0).unwrap(), 20);
        assert_eq!(iteration_budget(1.0, 1.0, 0.5, 2.0).unwrap(), 2);
        // independent evaluation of both terms
        let t1 = 160f64.powf(1.0 / 1.8);
        let t2 = 10f64.ln() / (16f64 / 15.0).ln();
        assert!((t1 - 16.77).abs() < 0.01 && (t2 - 35.68).abs() < 0.01);
        assert_eq!(iteration_budget(1.0, 4.0, 0.1, 1.8).unwrap(), t1.max(t2).ceil() as u64);
        assert_eq!(iteration_budget(1.0, 4.0, 0.1, 1.8).unwrap(), 36);
    }

    #[test]
    fn iteration_budget_rejects_bad_input() {
        assert!(iteration_budget(0.0, 1.0, 0.1, 2.0).is_err());
        assert!(iteration_budget(2.0, 1.0, 0.1, 2.0).is_err());
        assert!(iteration_budget(1.0, 2.0, 1.5, 2.0).is_err());
        assert!(iteration_budget(1.0, 2.0, 0.1, 1.0).is_err());
        assert!(iteration_budget(1.0, f64::INFINITY, 0.1, 2.0).is_err());
    }

    #[test]
    fn minimized_curve_beats_midpoint() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(41);
        for _ in 0..5 {
            let s = crate::testing::random_spd(8, 0.05, &mut rng);
            let p = pen(0.3, 0.7);
            let b = compute_bounds(&s, &p).unwrap();
            assert!(b.u2 <= bound_curve(&s, &p, b.ell_star, 0.5) + 1e-12);
            assert!(b.ell_star > 0.0 && b.ell_star <= b.psi_star1);
            assert!(b.psi_ub >= b.ell_star);
        }
    }

    #[test]
    fn ell_star_nonincreasing_in_scale_of_s() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(42);
        let s = crate::testing::random_spd(6, 0.1, &mut rng);
        let p = pen(0.5, 0.6);
        let mut prev = f64::INFINITY;
        for scale in [0.5, 1.0, 2.0, 4.0] {
            let b = compute_bounds(&s.scale(scale), &p).unwrap();
            assert!(b.ell_star <= prev);
            prev = b.ell_star;
        }
    }
}
