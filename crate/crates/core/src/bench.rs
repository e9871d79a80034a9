//! Penalty tuning and the time-to-tolerance harness.

use std::fmt;
use std::str::FromStr;

use crate::data::{default_density, generate_synthetic};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::penalty::ElasticNetPenalty;
use crate::solver::{
    solve_averaged, solve_deterministic, solve_stochastic, DetSolverConfig, SolveResult, StochConfig, NNZ_TOL,
};
use crate::threshold::{solve_blockwise, threshold_components, SolverChoice};

/// Bisection steps in `log lambda`.
const TUNE_STEPS: usize = 14;

/// Proportion of nonzero off-diagonal entries.
pub fn offdiag_density(theta: &SymMatrix<f64>, tol: f64) -> f64 {
    let p = theta.dim();
    if p < 2 {
        return 0.0;
    }
    let off = theta.nnz(tol).saturating_sub((0..p).filter(|&i| theta.get(i, i).abs() > tol).count());
    off as f64 / (p * (p - 1)) as f64
}

/// Largest `|s_ij|`, `i != j`.
fn max_offdiag(s: &SymMatrix<f64>) -> f64 {
    let mut m = 0.0f64;
    for i in 0..s.dim() {
        for j in 0..i {
            m = m.max(s.get(i, j).abs());
        }
    }
    m
}

#[derive(Clone, Debug)]
pub struct LambdaFit {
    pub lambda: f64,
    pub density: f64,
    pub solution: SolveResult<f64>,
}

/// Finds `lambda` whose solution has off-diagonal density close to
/// `target` (within 10% relative, or the best of the bisection steps).
/// Each trial solve is split by thresholding and warm-started from the
/// previous one.
pub fn tune_lambda(s: &SymMatrix<f64>, alpha: f64, target: f64, solver: &DetSolverConfig<f64>) -> Result<LambdaFit> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("tuning needs alpha in (0, 1], got {alpha}")));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!("target density must lie in (0, 1), got {target}")));
    }
    let top = max_offdiag(s);
    if top == 0.0 {
        return Err(Error::InvalidArgument("covariance is diagonal; every lambda gives density 0".into()));
    }

    let mut warm: Option<SymMatrix<f64>> = None;
    let fit = |lambda: f64, warm: &mut Option<SymMatrix<f64>>| -> Result<LambdaFit> {
        let pen = ElasticNetPenalty::new(lambda, alpha)?;
        let cfg = DetSolverConfig {
            theta0: warm.clone(),
            ..solver.clone()
        };
        let solution = solve_blockwise(s, &pen, &SolverChoice::Deterministic(cfg), None)?;
        *warm = Some(solution.theta_hat.clone());
        Ok(LambdaFit {
            lambda,
            density: offdiag_density(&solution.theta_hat, NNZ_TOL),
            solution,
        })
    };

    // at alpha * lambda >= max |s_ij| the solution is diagonal
    let mut hi = top / alpha;
    let mut lo = hi / 16.0;
    let mut best = fit(lo, &mut warm)?;
    while best.density < target {
        hi = lo;
        lo /= 16.0;
        if lo < top * 1e-12 {
            return Err(Error::InvalidArgument(format!("no lambda reaches density {target}")));
        }
        best = fit(lo, &mut warm)?;
    }
    for _ in 0..TUNE_STEPS {
        if (best.density - target).abs() <= 0.1 * target {
            break;
        }
        let mid = (lo * hi).sqrt();
        let cand = fit(mid, &mut warm)?;
        if cand.density >= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (cand.density - target).abs() < (best.density - target).abs() {
            best = cand;
        }
    }
    Ok(best)
}

/// A `lambda` (for the given `alpha`) whose thresholded graph has at least
/// `min_components` components, as small as possible, or `None` if even the
/// diagonal graph has fewer. The cut sits halfway between two consecutive
/// `|s_ij|` so no entry lies on it.
pub fn threshold_lambda(s: &SymMatrix<f64>, alpha: f64, min_components: usize) -> Option<f64> {
    let p = s.dim();
    if min_components > p || alpha <= 0.0 {
        return None;
    }
    let mut cuts: Vec<f64> = Vec::with_capacity(p * (p - 1) / 2 + 1);
    cuts.push(0.0);
    for i in 0..p {
        for j in 0..i {
            cuts.push(s.get(i, j).abs());
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let count = |cut: f64| threshold_components(s, &ElasticNetPenalty::new_unchecked(cut / alpha, alpha)).len();
    // component count is nondecreasing in the cut
    let (mut lo, mut hi) = (0, cuts.len() - 1);
    if count(cuts[hi]) < min_components {
        return None;
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if count(cuts[mid]) >= min_components {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let cut = match cuts.get(lo + 1) {
        Some(&next) => 0.5 * (cuts[lo] + next),
        None => 2.0 * cuts[lo],
    };
    (cut > 0.0).then_some(cut / alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Det,
    Stoch,
    Averaged,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Det, Algorithm::Stoch, Algorithm::Averaged];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Det => "det",
            Algorithm::Stoch => "stoch",
            Algorithm::Averaged => "averaged",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm {s:?} (det, stoch, averaged)")))
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub p_list: Vec<usize>,
    /// Instances use seeds `0..seeds`.
    pub seeds: u64,
    pub algorithms: Vec<Algorithm>,
    /// Relative error to the reference at which the clock stops.
    pub target_tol: f64,
    pub alpha: f64,
    /// Fixed penalty; tuned to density `10 / p` when absent.
    pub lambda: Option<f64>,
    /// Initial step for every algorithm.
    pub gamma0: f64,
    pub max_iters: usize,
    /// `rel_tol` of the deterministic reference solve.
    pub reference_tol: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            p_list: vec![100],
            seeds: 1,
            algorithms: Algorithm::ALL.to_vec(),
            target_tol: 0.1,
            alpha: 0.9,
            lambda: None,
            gamma0: 10.0,
            max_iters: 1000,
            reference_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub algorithm: Algorithm,
    pub p: usize,
    pub seed: u64,
    pub lambda: f64,
    pub reached: bool,
    pub iterations: u64,
    pub restarts: usize,
    /// Time to the target, or the whole run when it was not reached.
    pub seconds: f64,
    pub rel_error: f64,
}

pub const BENCH_HEADER: &str = "algorithm,p,seed,lambda,reached,iterations,restarts,seconds,rel_error";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.p,
            self.seed,
            self.lambda,
            self.reached,
            self.iterations,
            self.restarts,
            self.seconds,
            self.rel_error
        )
    }
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

/// Time-to-tolerance on synthetic instances: for every `p` and seed, a
/// tight deterministic solve gives the reference, then each algorithm runs
/// until its relative error reaches `target_tol`.
pub fn run_bench(cfg: &BenchConfig, mut progress: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    if !(cfg.target_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("target tolerance must be positive, got {}", cfg.target_tol)));
    }
    let mut rows = Vec::new();
    for &p in &cfg.p_list {
        for seed in 0..cfg.seeds {
            let prob = generate_synthetic::<f64>(p, default_density(p), 4.0, 1.0, seed)?;
            let det_base = DetSolverConfig {
                gamma0: Some(cfg.gamma0),
                rel_tol: cfg.reference_tol,
                max_iters: 100_000,
                ..Default::default()
            };
            let (lambda, warm) = match cfg.lambda {
                Some(l) => (l, None),
                None => {
                    let tuned = DetSolverConfig {
                        rel_tol: 1e-5,
                        ..det_base.clone()
                    };
                    let fit = tune_lambda(&prob.s, cfg.alpha, default_density(p), &tuned)?;
                    (fit.lambda, Some(fit.solution.theta_hat))
                }
            };
            let pen = ElasticNetPenalty::new(lambda, cfg.alpha)?;
            let reference = solve_deterministic(
                &prob.s,
                &pen,
                &DetSolverConfig {
                    theta0: warm,
                    ..det_base.clone()
                },
            )?
            .theta_hat;

            for &alg in &cfg.algorithms {
                let res = run_one(alg, &prob.s, &pen, cfg, &reference, seed)?;
                let hit = res
                    .trace
                    .iter()
                    .find(|r| r.rel_error.is_some_and(|e| e <= cfg.target_tol));
                let last = res.trace.last();
                let row = BenchRow {
                    algorithm: alg,
                    p,
                    seed,
                    lambda,
                    reached: hit.is_some(),
                    iterations: hit.or(last).map_or(0, |r| r.iter),
                    restarts: res.restarts,
                    seconds: hit.or(last).map_or(0.0, |r| r.elapsed_s),
                    rel_error: hit.or(last).and_then(|r| r.rel_error).unwrap_or(f64::NAN),
                };
                progress(&row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

fn run_one(
    alg: Algorithm,
    s: &SymMatrix<f64>,
    pen: &ElasticNetPenalty<f64>,
    cfg: &BenchConfig,
    reference: &SymMatrix<f64>,
    seed: u64,
) -> Result<SolveResult<f64>> {
    match alg {
        Algorithm::Det => solve_deterministic(
            s,
            pen,
            &DetSolverConfig {
                gamma0: Some(cfg.gamma0),
                rel_tol: 1e-12,
                max_iters: cfg.max_iters,
                reference: Some(reference.clone()),
                target_rel_error: Some(cfg.target_tol),
                ..Default::default()
            },
        ),
        Algorithm::Stoch | Algorithm::Averaged => {
            let sc = StochConfig {
                gamma0: Some(cfg.gamma0),
                rel_tol: 1e-12,
                max_iters: cfg.max_iters,
                seed,
                reference: Some(reference.clone()),
                target_rel_error: Some(cfg.target_tol),
                ..Default::default()
            };
            if alg == Algorithm::Stoch {
                solve_stochastic(s, pen, &sc)
            } else {
                solve_averaged(s, pen, &sc)
            }
        }
    }
}
