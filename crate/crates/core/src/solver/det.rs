use crate::bounds::{compute_bounds, default_step};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, invert_via_factor, SymMatrix};
use crate::penalty::{kkt_residual_with_inverse, objective_with_factor, prox, ElasticNetPenalty, KKT_ZERO_TOL};
use crate::scalar::Scalar;

use super::{check_common, clip_spectrum, default_theta0, relative_change, Recorder, SolveResult, StopReason};

/// Relative objective increase tolerated before a step counts as ascent.
const ASCENT_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct DetSolverConfig<T> {
    /// Initial step. `None` uses `ell_star^2`, which never triggers a restart.
    pub gamma0: Option<T>,
    /// Factor applied to the step on every restart.
    pub step_shrink: T,
    pub max_restarts: usize,
    /// Cap on accepted iterations, summed over restarts.
    pub max_iters: usize,
    pub rel_tol: T,
    /// Starting point; defaults to the inverse sample variances.
    pub theta0: Option<SymMatrix<T>>,
    /// Use `gamma = ell_star^2` and clip the start into
    /// `[ell_star, min(psi_ub, psi_star1)]`, so every iterate provably stays
    /// in the spectral box. Overrides `gamma0`.
    pub guaranteed: bool,
    /// Solution to measure `rel_error` against.
    pub reference: Option<SymMatrix<T>>,
    /// Stop as soon as `rel_error` drops to this value.
    pub target_rel_error: Option<f64>,
    /// Also restart when a step increases the objective. A positive definite
    /// iterate can otherwise cycle forever when the step is too long.
    pub restart_on_ascent: bool,
}

impl<T: Scalar> Default for DetSolverConfig<T> {
    fn default() -> Self {
        Self {
            gamma0: None,
            step_shrink: T::cast(0.5),
            max_restarts: 50,
            max_iters: 10_000,
            rel_tol: T::cast(1e-8),
            theta0: None,
            guaranteed: false,
            reference: None,
            target_rel_error: None,
            restart_on_ascent: true,
        }
    }
}

/// `Prox_gamma(theta - gamma (S - theta^{-1}))`. The result need not be
/// positive definite.
pub fn prox_grad_step<T: Scalar>(
    theta: &SymMatrix<T>,
    s: &SymMatrix<T>,
    pen: &ElasticNetPenalty<T>,
    gamma: T,
) -> Result<SymMatrix<T>> {
    let inv = invert_via_factor(&cholesky(theta)?);
    Ok(step_with_inverse(theta, &inv, s, pen, gamma))
}

/// Gradient step with an estimate `h` of `theta^{-1}`, followed by the prox.
pub(crate) fn step_with_inverse<T: Scalar>(
    theta: &SymMatrix<T>,
    h: &SymMatrix<T>,
    s: &SymMatrix<T>,
    pen: &ElasticNetPenalty<T>,
    gamma: T,
) -> SymMatrix<T> {
    let mut moved = theta.clone();
    moved.zip3_in_place(s, h, |t, sv, hv| t - gamma * (sv - hv));
    prox(&moved, gamma, pen)
}

/// Deterministic proximal gradient with the exact inverse.
///
/// Every candidate is factored; if that fails (or, with `restart_on_ascent`,
/// if the objective goes up) the run restarts from the initial point with
/// the step multiplied by `step_shrink`. Stops once the
/// relative change `||theta_{k+1} - theta_k||_F / max(1, ||theta_k||_F)`
/// drops to `rel_tol`, or at `max_iters` with `converged = false`.
pub fn solve_deterministic<T: Scalar>(
    s: &SymMatrix<T>,
    pen: &ElasticNetPenalty<T>,
    cfg: &DetSolverConfig<T>,
) -> Result<SolveResult<T>> {
    check_common(s, cfg.theta0.as_ref(), cfg.step_shrink, cfg.rel_tol)?;
    let p = s.dim();
    let mut rec = Recorder::new(cfg.reference.as_ref(), cfg.target_rel_error)?;
    rec.check_reference_dim(p)?;

    let start = cfg.theta0.clone().unwrap_or_else(|| default_theta0(s, pen));
    let (theta0, mut gamma) = if cfg.guaranteed || cfg.gamma0.is_none() {
        let b = compute_bounds(s, pen)?;
        let theta0 = if cfg.guaranteed {
            clip_spectrum(&start, b.ell_star, b.psi_ub.min(b.psi_star1))?
        } else {
            start
        };
        let gamma = match cfg.gamma0 {
            Some(g) if !cfg.guaranteed => g,
            _ => default_step(&b),
        };
        (theta0, gamma)
    } else {
        (start, cfg.gamma0.unwrap_or_else(T::one))
    };
    if !(gamma > T::zero() && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {gamma}")));
    }

    let factor0 = cholesky(&theta0)?;
    let inv0 = invert_via_factor(&factor0);
    let obj0 = objective_with_factor(&theta0, &factor0, s, pen);
    let mut restarts = 0;
    'restart: loop {
        let mut theta = theta0.clone();
        let mut inv = inv0.clone();
        let mut prev_obj = obj0;
        loop {
            if rec.trace.len() >= cfg.max_iters {
                return Ok(finish(theta, &inv, s, pen, restarts, StopReason::MaxIters, rec));
            }
            let next = step_with_inverse(&theta, &inv, s, pen, gamma);
            let accepted = match cholesky(&next) {
                Ok(f) => {
                    let obj = objective_with_factor(&next, &f, s, pen);
                    let change = relative_change(&next, &theta);
                    let slack = T::cast(ASCENT_SLACK) * prev_obj.abs().max(T::one());
                    if cfg.restart_on_ascent && obj > prev_obj + slack && change > cfg.rel_tol {
                        None
                    } else {
                        Some((f, obj, change))
                    }
                }
                Err(Error::NotPositiveDefinite { .. }) => None,
                Err(e) => return Err(e),
            };
            let Some((factor, obj, change)) = accepted else {
                restarts += 1;
                if restarts > cfg.max_restarts {
                    return Err(Error::MaxRestartsExceeded {
                        restarts: cfg.max_restarts,
                        last_step: gamma.to_f64_lossy(),
                    });
                }
                gamma *= cfg.step_shrink;
                continue 'restart;
            };
            if !obj.is_finite() {
                return Err(Error::NonFiniteObjective { iter: rec.trace.len() + 1 });
            }
            prev_obj = obj;
            let hit = rec.record(&next, obj, gamma, None, change);
            theta = next;
            inv = invert_via_factor(&factor);
            if change <= cfg.rel_tol {
                return Ok(finish(theta, &inv, s, pen, restarts, StopReason::Tolerance, rec));
            }
            if hit {
                return Ok(finish(theta, &inv, s, pen, restarts, StopReason::TargetReached, rec));
            }
        }
    }
}

pub(crate) fn finish<T: Scalar>(
    theta: SymMatrix<T>,
    inv: &SymMatrix<T>,
    s: &SymMatrix<T>,
    pen: &ElasticNetPenalty<T>,
    restarts: usize,
    stop_reason: StopReason,
    rec: Recorder<'_, T>,
) -> SolveResult<T> {
    let kkt_residual = kkt_residual_with_inverse(&theta, inv, s, pen, T::cast(KKT_ZERO_TOL));
    SolveResult {
        iterations: rec.trace.len(),
        restarts,
        converged: stop_reason != StopReason::MaxIters,
        stop_reason,
        trace: rec.trace,
        kkt_residual,
        theta_hat: theta,
    }
}
