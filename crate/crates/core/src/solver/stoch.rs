use crate::bounds::{compute_bounds, default_step};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, invert_via_factor, SymMatrix};
use crate::penalty::{objective_with_factor, ElasticNetPenalty};
use crate::sampler::{seeded_rng, GaussianSampler};
use crate::scalar::Scalar;

use super::det::{finish, step_with_inverse};
use super::{check_common, default_theta0, relative_change, Recorder, SolveResult, StopReason};

/// Consecutive small relative changes required before a stochastic run is
/// declared converged.
pub const STOCH_PATIENCE: usize = 5;

/// Growing Monte Carlo batch `N_k = ceil(base + k^exponent)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchSchedule {
    pub base: f64,
    pub exponent: f64,
}

impl Default for BatchSchedule {
    fn default() -> Self {
        Self {
            base: 30.0,
            exponent: 1.8,
        }
    }
}

impl BatchSchedule {
    pub fn new(base: f64, exponent: f64) -> Result<Self> {
        let b = Self { base, exponent };
        b.validate()?;
        Ok(b)
    }

    /// The batch sizes must be summable in reciprocal, hence `exponent > 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.base >= 1.0 && self.base.is_finite()) {
            return Err(Error::InvalidSchedule(format!("batch base must be >= 1, got {}", self.base)));
        }
        if !(self.exponent > 1.0 && self.exponent.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "batch exponent must exceed 1, got {}",
                self.exponent
            )));
        }
        Ok(())
    }

    pub fn batch(&self, k: u64) -> usize {
        (self.base + (k as f64).powf(self.exponent)).ceil() as usize
    }
}

/// Averaging weights `zeta_k = coefficient * k^(-decay)`, `k >= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AveragingSchedule {
    pub coefficient: f64,
    pub decay: f64,
}

impl Default for AveragingSchedule {
    fn default() -> Self {
        Self {
            coefficient: 1.0,
            decay: 0.7,
        }
    }
}

impl AveragingSchedule {
    pub fn new(coefficient: f64, decay: f64) -> Result<Self> {
        let a = Self { coefficient, decay };
        a.validate()?;
        Ok(a)
    }

    /// `sum zeta_k` must diverge and `sum zeta_k^2` converge, which for a
    /// power law means `decay` in `(0.5, 1]`.
    pub fn validate(&self) -> Result<()> {
        if !(self.coefficient > 0.0 && self.coefficient.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "averaging coefficient must be positive, got {}",
                self.coefficient
            )));
        }
        if !(self.decay > 0.5 && self.decay <= 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "averaging decay must lie in (0.5, 1], got {}",
                self.decay
            )));
        }
        Ok(())
    }

    pub fn zeta(&self, k: u64) -> f64 {
        self.coefficient * (k as f64).powf(-self.decay)
    }
}

#[derive(Clone, Debug)]
pub struct StochConfig<T> {
    /// Initial step. `None` uses `ell_star^2`.
    pub gamma0: Option<T>,
    pub step_shrink: T,
    pub max_restarts: usize,
    pub max_iters: usize,
    pub rel_tol: T,
    pub seed: u64,
    /// Batch sizes for [`solve_stochastic`].
    pub batch: BatchSchedule,
    /// Draws per iteration for [`solve_averaged`].
    pub fixed_n: usize,
    pub averaging: AveragingSchedule,
    /// Initial covariance estimate for [`solve_averaged`]; identity if absent.
    pub sigma0: Option<SymMatrix<T>>,
    pub theta0: Option<SymMatrix<T>>,
    pub reference: Option<SymMatrix<T>>,
    pub target_rel_error: Option<f64>,
}

impl<T: Scalar> Default for StochConfig<T> {
    fn default() -> Self {
        Self {
            gamma0: Some(T::cast(10.0)),
            step_shrink: T::cast(0.5),
            max_restarts: 50,
            max_iters: 1000,
            rel_tol: T::cast(1e-4),
            seed: 0,
            batch: BatchSchedule::default(),
            fixed_n: 400,
            averaging: AveragingSchedule::default(),
            sigma0: None,
            theta0: None,
            reference: None,
            target_rel_error: None,
        }
    }
}

enum Estimator<T> {
    Growing { base: f64, exponent: f64 },
    Averaged { sigma: SymMatrix<T>, n: usize, zeta: AveragingSchedule },
}

/// Stochastic proximal gradient: `theta^{-1}` is replaced by the average of
/// `N_k` outer products of draws from `N(0, theta_k^{-1})`.
///
/// A candidate that fails to factor triggers a restart from the last
/// accepted iterate with a smaller step and a doubled batch base.
pub fn solve_stochastic<T: Scalar>(
    s: &SymMatrix<T>,
    pen: &ElasticNetPenalty<T>,
    cfg: &StochConfig<T>,
) -> Result<SolveResult<T>> {
    cfg.batch.validate()?;
    let est = Estimator::Growing {
        base: cfg.batch.base,
        exponent: cfg.batch.exponent,
    };
    run(s, pen, cfg, est)
}

/// Stochastic proximal gradient with a fixed batch whose covariance
/// estimates are recycled:
/// `Sigma_{k+1} = Sigma_k + zeta_{k+1} (Sigma_hat - Sigma_k)`.
///
/// A restart keeps the last accepted iterate and resets `Sigma` to `sigma0`.
pub fn solve_averaged<T: Scalar>(
    s: &SymMatrix<T>,
    pen: &ElasticNetPenalty<T>,
    cfg: &StochConfig<T>,
) -> Result<SolveResult<T>> {
    cfg.averaging.validate()?;
    if cfg.fixed_n == 0 {
        return Err(Error::InvalidSchedule("fixed batch size must be >= 1".into()));
    }
    let sigma = sigma0(s.dim(), cfg)?;
    let est = Estimator::Averaged {
        sigma,
        n: cfg.fixed_n,
        zeta: cfg.averaging,
    };
    run(s, pen, cfg, est)
}

fn sigma0<T: Scalar>(p: usize, cfg: &StochConfig<T>) -> Result<SymMatrix<T>> {
    match &cfg.sigma0 {
        Some(m) if m.dim() != p => Err(Error::dims(format!("{p}x{p} sigma0"), format!("{0}x{0}", m.dim()))),
        Some(m) => Ok(m.clone()),
        None => Ok(SymMatrix::identity(p)),
    }
}

fn run<T: Scalar>(
    s: &SymMatrix<T>,
    pen: &ElasticNetPenalty<T>,
    cfg: &StochConfig<T>,
    mut est: Estimator<T>,
) -> Result<SolveResult<T>> {
    check_common(s, cfg.theta0.as_ref(), cfg.step_shrink, cfg.rel_tol)?;
    let p = s.dim();
    let mut rec = Recorder::new(cfg.reference.as_ref(), cfg.target_rel_error)?;
    rec.check_reference_dim(p)?;

    let mut gamma = match cfg.gamma0 {
        Some(g) => g,
        None => default_step(&compute_bounds(s, pen)?),
    };
    if !(gamma > T::zero() && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {gamma}")));
    }
    let mut theta = cfg.theta0.clone().unwrap_or_else(|| default_theta0(s, pen));
    let mut sampler = GaussianSampler::from_factor(cholesky(&theta)?, seeded_rng(cfg.seed, 0));

    let mut k: u64 = 0;
    let mut restarts = 0;
    let mut streak = 0;
    let stop = loop {
        if rec.trace.len() >= cfg.max_iters {
            break StopReason::MaxIters;
        }
        let (n, sigma_next) = match &est {
            Estimator::Growing { base, exponent } => {
                let n = (base + (k as f64).powf(*exponent)).ceil() as usize;
                (n, sampler.sample_covariance(n).matrix)
            }
            Estimator::Averaged { sigma, n, zeta } => {
                let hat = sampler.sample_covariance(*n).matrix;
                let z = T::cast(zeta.zeta(k + 1));
                (*n, sigma.zip_map(&hat, |a, b| a + z * (b - a)))
            }
        };
        let next = step_with_inverse(&theta, &sigma_next, s, pen, gamma);
        let factor = match cholesky(&next) {
            Ok(f) => f,
            Err(Error::NotPositiveDefinite { .. }) => {
                restarts += 1;
                if restarts > cfg.max_restarts {
                    return Err(Error::MaxRestartsExceeded {
                        restarts: cfg.max_restarts,
                        last_step: gamma.to_f64_lossy(),
                    });
                }
                gamma *= cfg.step_shrink;
                match &mut est {
                    Estimator::Growing { base, .. } => *base *= 2.0,
                    Estimator::Averaged { sigma, .. } => *sigma = sigma0(p, cfg)?,
                }
                k = 0;
                streak = 0;
                continue;
            }
            Err(e) => return Err(e),
        };
        let obj = objective_with_factor(&next, &factor, s, pen);
        if !obj.is_finite() {
            return Err(Error::NonFiniteObjective { iter: rec.trace.len() + 1 });
        }
        let change = relative_change(&next, &theta);
        let hit = rec.record(&next, obj, gamma, Some(n), change);
        theta = next;
        sampler.set_factor(factor);
        if let Estimator::Averaged { sigma, .. } = &mut est {
            *sigma = sigma_next;
        }
        k += 1;
        streak = if change <= cfg.rel_tol { streak + 1 } else { 0 };
        if streak >= STOCH_PATIENCE {
            break StopReason::Tolerance;
        }
        if hit {
            break StopReason::TargetReached;
        }
    };
    let inv = invert_via_factor(sampler.factor());
    Ok(finish(theta, &inv, s, pen, restarts, stop, rec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{relative_error, solve_deterministic, DetSolverConfig};

    fn pen(lambda: f64, alpha: f64) -> ElasticNetPenalty<f64> {
        ElasticNetPenalty::new(lambda, alpha).unwrap()
    }

    fn scalar(v: f64) -> SymMatrix<f64> {
        SymMatrix::from_diag(&[v])
    }

    #[test]
    fn batch_schedule_values() {
        let b = BatchSchedule::default();
        assert_eq!(b.batch(0), 30);
        assert_eq!(b.batch(1), 31);
        assert_eq!(b.batch(10), (30.0 + 10f64.powf(1.8)).ceil() as usize);
        assert!(BatchSchedule::new(30.0, 1.0).is_err());
        assert!(BatchSchedule::new(0.0, 1.5).is_err());
    }

    #[test]
    fn averaging_schedule_validation() {
        assert!(matches!(AveragingSchedule::new(1.0, 0.4), Err(Error::InvalidSchedule(_))));
        assert!(AveragingSchedule::new(1.0, 0.5).is_err());
        assert!(AveragingSchedule::new(1.0, 1.0).is_ok());
        assert!(AveragingSchedule::new(0.0, 0.7).is_err());
        let z = AveragingSchedule::default();
        assert_eq!(z.zeta(1), 1.0);
        assert!((z.zeta(10) - 10f64.powf(-0.7)).abs() < 1e-15);
    }

    #[test]
    fn averaged_solver_rejects_bad_decay() {
        let cfg = StochConfig {
            averaging: AveragingSchedule {
                coefficient: 1.0,
                decay: 0.4,
            },
            ..Default::default()
        };
        assert!(matches!(
            solve_averaged(&scalar(1.0), &pen(1.0, 1.0), &cfg),
            Err(Error::InvalidSchedule(_))
        ));
    }

    #[test]
    fn growing_batch_scalar_problem() {
        let cfg = StochConfig {
            gamma0: Some(0.25),
            seed: 42,
            max_iters: 200,
            rel_tol: 1e-300,
            ..Default::default()
        };
        let r = solve_stochastic(&scalar(1.0), &pen(1.0, 1.0), &cfg).unwrap();
        assert_eq!(r.iterations, 200);
        assert!((r.theta_hat.get(0, 0) - 0.5).abs() <= 0.01, "{}", r.theta_hat.get(0, 0));
    }

    #[test]
    fn averaged_scalar_problem() {
        let cfg = StochConfig {
            gamma0: Some(0.25),
            seed: 42,
            max_iters: 500,
            fixed_n: 50,
            rel_tol: 1e-300,
            ..Default::default()
        };
        let r = solve_averaged(&scalar(1.0), &pen(1.0, 1.0), &cfg).unwrap();
        assert!((r.theta_hat.get(0, 0) - 0.5).abs() <= 0.02, "{}", r.theta_hat.get(0, 0));
    }

    #[test]
    fn recorded_batches_follow_the_schedule() {
        let cfg = StochConfig {
            gamma0: Some(0.1),
            max_iters: 15,
            rel_tol: 1e-300,
            ..Default::default()
        };
        let s = SymMatrix::from_lower_fn(3, |i, j| if i == j { 1.0 } else { 0.2 });
        let r = solve_stochastic(&s, &pen(0.1, 0.5), &cfg).unwrap();
        assert_eq!(r.restarts, 0);
        for (k, t) in r.trace.iter().enumerate() {
            assert_eq!(t.batch_n, Some(cfg.batch.batch(k as u64) as u64));
        }
    }

    #[test]
    fn tiny_penalty_recovers_identity() {
        let s = SymMatrix::<f64>::identity(5);
        let p = pen(1e-6, 1.0);
        let det = solve_deterministic(
            &s,
            &p,
            &DetSolverConfig {
                gamma0: Some(0.5),
                rel_tol: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        let cfg = StochConfig {
            gamma0: Some(0.5),
            theta0: Some(SymMatrix::identity(5)),
            seed: 3,
            max_iters: 200,
            rel_tol: 1e-300,
            ..Default::default()
        };
        let r = solve_stochastic(&s, &p, &cfg).unwrap();
        assert!(relative_error(&r.theta_hat, &det.theta_hat) <= 0.05);
    }

    #[test]
    fn same_seed_same_trace() {
        let s = SymMatrix::from_lower_fn(4, |i, j| if i == j { 1.0 } else { 0.3 });
        let cfg = StochConfig {
            gamma0: Some(0.3),
            seed: 9,
            max_iters: 30,
            ..Default::default()
        };
        for solve in [solve_stochastic::<f64>, solve_averaged::<f64>] {
            let a = solve(&s, &pen(0.1, 0.8), &cfg).unwrap();
            let b = solve(&s, &pen(0.1, 0.8), &cfg).unwrap();
            assert_eq!(a.theta_hat, b.theta_hat);
            let strip = |r: &SolveResult<f64>| {
                r.trace
                    .iter()
                    .map(|t| (t.objective, t.rel_change, t.batch_n, t.nnz))
                    .collect::<Vec<_>>()
            };
            assert_eq!(strip(&a), strip(&b));
        }
    }

    #[test]
    fn restart_doubles_batch_base_and_shrinks_step() {
        let s = SymMatrix::from_lower_fn(4, |i, j| if i == j { 1.0 } else { 0.3 });
        let cfg = StochConfig {
            gamma0: Some(40.0),
            seed: 1,
            max_iters: 40,
            rel_tol: 1e-300,
            ..Default::default()
        };
        let r = solve_stochastic(&s, &pen(0.05, 1.0), &cfg).unwrap();
        assert!(r.restarts > 0);
        let mut k = 0u64;
        for (i, t) in r.trace.iter().enumerate() {
            if i > 0 && t.step != r.trace[i - 1].step {
                k = 0;
            }
            let halvings = (40.0 / t.step).log2().round() as i32;
            assert_eq!(t.step, 40.0 * 0.5f64.powi(halvings));
            let want = (30.0 * 2f64.powi(halvings) + (k as f64).powf(1.8)).ceil() as u64;
            assert_eq!(t.batch_n, Some(want), "record {i}");
            k += 1;
        }
    }

    #[test]
    fn stops_after_consecutive_small_changes() {
        let cfg = StochConfig {
            gamma0: Some(0.25),
            seed: 5,
            max_iters: 2000,
            rel_tol: 5e-3,
            ..Default::default()
        };
        let r = solve_stochastic(&scalar(1.0), &pen(1.0, 1.0), &cfg).unwrap();
        assert_eq!(r.stop_reason, StopReason::Tolerance);
        let tail = &r.trace[r.trace.len() - STOCH_PATIENCE..];
        assert!(tail.iter().all(|t| t.rel_change <= 5e-3));
    }
}
