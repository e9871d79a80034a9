//! Proximal gradient solvers for the penalized log-likelihood: the exact
//! deterministic iteration and the two Monte Carlo variants.

mod det;
mod stoch;

pub use det::{prox_grad_step, solve_deterministic, DetSolverConfig};
pub use stoch::{solve_averaged, solve_stochastic, AveragingSchedule, BatchSchedule, StochConfig};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigendecompose, extreme_eigenvalues, SymMatrix};
use crate::penalty::ElasticNetPenalty;
use crate::scalar::Scalar;

/// Entries with `|theta_ij|` above this count as nonzero in traces.
pub const NNZ_TOL: f64 = 1e-8;

/// Cap on the heuristic step size.
pub const MAX_HEURISTIC_STEP: f64 = 10.0;

/// One accepted iterate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based count of accepted iterates, across restarts.
    pub iter: u64,
    pub elapsed_s: f64,
    pub objective: f64,
    pub step: f64,
    /// Monte Carlo batch size, for the stochastic solvers.
    pub batch_n: Option<u64>,
    pub nnz: u64,
    pub rel_change: f64,
    /// `||theta_k - ref||_F / ||ref||_F` when a reference was supplied.
    pub rel_error: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The relative change fell below `rel_tol`.
    Tolerance,
    /// The relative error against the reference fell below the target.
    TargetReached,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct SolveResult<T> {
    pub theta_hat: SymMatrix<T>,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub trace: Vec<TraceRecord>,
    pub kkt_residual: T,
}

impl<T: Scalar> SolveResult<T> {
    /// Objective at the last accepted iterate (`NaN` if there was none).
    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn elapsed_s(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.elapsed_s)
    }
}

/// `||a - b||_F / max(1, ||b||_F)`.
pub fn relative_change<T: Scalar>(a: &SymMatrix<T>, b: &SymMatrix<T>) -> T {
    a.sub(b).frobenius_norm() / b.frobenius_norm().max(T::one())
}

/// `||a - reference||_F / ||reference||_F`.
pub fn relative_error<T: Scalar>(a: &SymMatrix<T>, reference: &SymMatrix<T>) -> T {
    a.sub(reference).frobenius_norm() / reference.frobenius_norm()
}

/// Diagonal matrix of inverse sample variances. Zero variances fall back to
/// `1 / lambda`.
pub fn default_theta0<T: Scalar>(s: &SymMatrix<T>, pen: &ElasticNetPenalty<T>) -> SymMatrix<T> {
    let d: Vec<T> = s
        .diag()
        .into_iter()
        .map(|v| if v > T::zero() { T::one() / v } else { T::one() / pen.lambda() })
        .collect();
    SymMatrix::from_diag(&d)
}

/// `1 / lambda_max(S)^2`, capped at [`MAX_HEURISTIC_STEP`].
pub fn heuristic_step<T: Scalar>(s: &SymMatrix<T>) -> Result<T> {
    let (_, hi) = extreme_eigenvalues(s)?;
    let cap = T::cast(MAX_HEURISTIC_STEP);
    Ok(if hi > T::zero() { (T::one() / (hi * hi)).min(cap) } else { cap })
}

/// Projects the spectrum of `theta` onto `[lo, hi]`.
pub fn clip_spectrum<T: Scalar>(theta: &SymMatrix<T>, lo: T, hi: T) -> Result<SymMatrix<T>> {
    if !(lo <= hi) {
        return Err(Error::InvalidArgument(format!("empty spectral box [{lo}, {hi}]")));
    }
    let spec = eigendecompose(theta)?;
    Ok(spec.reassemble(|d| d.max(lo).min(hi)))
}

pub(crate) fn check_common<T: Scalar>(
    s: &SymMatrix<T>,
    theta0: Option<&SymMatrix<T>>,
    step_shrink: T,
    rel_tol: T,
) -> Result<()> {
    if !s.all_finite() {
        return Err(Error::InvalidArgument("covariance has non-finite entries".into()));
    }
    if let Some(t0) = theta0 {
        if t0.dim() != s.dim() {
            return Err(Error::dims(format!("{0}x{0} start", s.dim()), format!("{0}x{0}", t0.dim())));
        }
    }
    if !(step_shrink > T::zero() && step_shrink < T::one()) {
        return Err(Error::InvalidArgument(format!("step_shrink must lie in (0, 1), got {step_shrink}")));
    }
    if !(rel_tol > T::zero()) {
        return Err(Error::InvalidArgument(format!("rel_tol must be positive, got {rel_tol}")));
    }
    Ok(())
}

/// Shared bookkeeping for the iteration loops.
pub(crate) struct Recorder<'a, T> {
    start: Instant,
    reference: Option<(&'a SymMatrix<T>, T)>,
    target: Option<f64>,
    pub trace: Vec<TraceRecord>,
}

impl<'a, T: Scalar> Recorder<'a, T> {
    pub fn new(reference: Option<&'a SymMatrix<T>>, target: Option<f64>) -> Result<Self> {
        let reference = match reference {
            Some(r) => {
                let norm = r.frobenius_norm();
                if !(norm > T::zero()) {
                    return Err(Error::InvalidArgument("reference matrix is zero".into()));
                }
                Some((r, norm))
            }
            None => None,
        };
        Ok(Self {
            start: Instant::now(),
            reference,
            target,
            trace: Vec::new(),
        })
    }

    pub fn check_reference_dim(&self, p: usize) -> Result<()> {
        match self.reference {
            Some((r, _)) if r.dim() != p => {
                Err(Error::dims(format!("{p}x{p} reference"), format!("{0}x{0}", r.dim())))
            }
            _ => Ok(()),
        }
    }

    /// Appends a record; returns true when the target error is reached.
    pub fn record(
        &mut self,
        theta: &SymMatrix<T>,
        objective: T,
        step: T,
        batch_n: Option<usize>,
        rel_change: T,
    ) -> bool {
        let rel_error = self
            .reference
            .map(|(r, norm)| (theta.sub(r).frobenius_norm() / norm).to_f64_lossy());
        self.trace.push(TraceRecord {
            iter: self.trace.len() as u64 + 1,
            elapsed_s: self.start.elapsed().as_secs_f64(),
            objective: objective.to_f64_lossy(),
            step: step.to_f64_lossy(),
            batch_n: batch_n.map(|n| n as u64),
            nnz: theta.nnz(T::cast(NNZ_TOL)) as u64,
            rel_change: rel_change.to_f64_lossy(),
            rel_error,
        });
        matches!((rel_error, self.target), (Some(e), Some(t)) if e <= t)
    }
}
