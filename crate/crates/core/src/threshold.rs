//! Exact covariance thresholding. The connected components of the graph with
//! an edge wherever `|s_ij| > alpha * lambda` are exactly the blocks of the
//! solution, so each block can be solved on its own.

use rayon::prelude::*;

use crate::bounds::quadratic_root;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::penalty::{kkt_residual, ElasticNetPenalty, KKT_ZERO_TOL};
use crate::scalar::Scalar;
use crate::solver::{
    solve_averaged, solve_deterministic, solve_stochastic, DetSolverConfig, SolveResult, StochConfig, StopReason,
    TraceRecord, NNZ_TOL,
};

/// Edges `(i, j)`, `i < j`, with `|s_ij| > alpha * lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdGraph {
    pub dim: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Disjoint sorted index lists covering `0..p`, ordered by smallest member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentPartition {
    pub components: Vec<Vec<usize>>,
}

impl ComponentPartition {
    pub fn sizes(&self) -> Vec<usize> {
        self.components.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Component index of every node.
    pub fn labels(&self) -> Vec<usize> {
        let p = self.components.iter().map(Vec::len).sum();
        let mut out = vec![0; p];
        for (c, members) in self.components.iter().enumerate() {
            for &i in members {
                out[i] = c;
            }
        }
        out
    }
}

pub fn threshold_graph<T: Scalar>(s: &SymMatrix<T>, pen: &ElasticNetPenalty<T>) -> ThresholdGraph {
    let p = s.dim();
    let cut = pen.lambda1();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in 0..i {
            if s.get(i, j).abs() > cut {
                edges.push((j, i));
            }
        }
    }
    ThresholdGraph { dim: p, edges }
}

struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

impl ThresholdGraph {
    pub fn components(&self) -> ComponentPartition {
        let mut sets = DisjointSets::new(self.dim);
        for &(i, j) in &self.edges {
            sets.union(i, j);
        }
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); self.dim];
        for i in 0..self.dim {
            let r = sets.find(i);
            by_root[r].push(i);
        }
        let mut components: Vec<Vec<usize>> = by_root.into_iter().filter(|c| !c.is_empty()).collect();
        components.sort_by_key(|c| c[0]);
        ComponentPartition { components }
    }
}

/// Connected components of the thresholded graph. With `alpha = 0` the
/// threshold is zero and the whole problem is returned as one component.
pub fn threshold_components<T: Scalar>(s: &SymMatrix<T>, pen: &ElasticNetPenalty<T>) -> ComponentPartition {
    if pen.lambda1() <= T::zero() {
        return ComponentPartition {
            components: vec![(0..s.dim()).collect()],
        };
    }
    threshold_graph(s, pen).components()
}

/// Groups entries with `|theta_ij| > tol` into connected components.
pub fn support_components<T: Scalar>(theta: &SymMatrix<T>, tol: T) -> ComponentPartition {
    let p = theta.dim();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in 0..i {
            if theta.get(i, j).abs() > tol {
                edges.push((j, i));
            }
        }
    }
    ThresholdGraph { dim: p, edges }.components()
}

#[derive(Clone, Debug)]
pub enum SolverChoice<T> {
    Deterministic(DetSolverConfig<T>),
    Stochastic(StochConfig<T>),
    Averaged(StochConfig<T>),
}

impl<T: Scalar> SolverChoice<T> {
    pub fn solve(&self, s: &SymMatrix<T>, pen: &ElasticNetPenalty<T>) -> Result<SolveResult<T>> {
        match self {
            SolverChoice::Deterministic(c) => solve_deterministic(s, pen, c),
            SolverChoice::Stochastic(c) => solve_stochastic(s, pen, c),
            SolverChoice::Averaged(c) => solve_averaged(s, pen, c),
        }
    }

    fn reference(&self) -> Option<&SymMatrix<T>> {
        match self {
            SolverChoice::Deterministic(c) => c.reference.as_ref(),
            SolverChoice::Stochastic(c) | SolverChoice::Averaged(c) => c.reference.as_ref(),
        }
    }

    /// The configuration restricted to the nodes `idx`; stochastic seeds
    /// become `seed ^ block`.
    fn restrict(&self, idx: &[usize], block: usize) -> Self {
        let sub = |m: &Option<SymMatrix<T>>| m.as_ref().map(|m| m.submatrix(idx));
        match self {
            SolverChoice::Deterministic(c) => SolverChoice::Deterministic(DetSolverConfig {
                theta0: sub(&c.theta0),
                reference: sub(&c.reference),
                ..c.clone()
            }),
            SolverChoice::Stochastic(c) | SolverChoice::Averaged(c) => {
                let c = StochConfig {
                    theta0: sub(&c.theta0),
                    reference: sub(&c.reference),
                    sigma0: sub(&c.sigma0),
                    seed: c.seed ^ block as u64,
                    ..c.clone()
                };
                if matches!(self, SolverChoice::Stochastic(_)) {
                    SolverChoice::Stochastic(c)
                } else {
                    SolverChoice::Averaged(c)
                }
            }
        }
    }
}

/// Solves every thresholded component separately and assembles the result
/// with exact zeros between components.
///
/// Blocks run on a pool of `threads` workers (all cores when `None`); each
/// block's randomness depends only on its index, so the result does not
/// depend on scheduling. Singletons use the scalar closed form. The merged
/// trace sums objectives and batch sizes over blocks and reports the
/// largest step, relative change and elapsed time; `rel_error` is computed
/// over the whole matrix.
pub fn solve_blockwise<T: Scalar>(
    s: &SymMatrix<T>,
    pen: &ElasticNetPenalty<T>,
    solver: &SolverChoice<T>,
    threads: Option<usize>,
) -> Result<SolveResult<T>> {
    let partition = threshold_components(s, pen);
    if partition.len() == 1 {
        return solver.solve(s, pen);
    }
    let p = s.dim();
    if let Some(r) = solver.reference() {
        if r.dim() != p {
            return Err(Error::dims(format!("{p}x{p} reference"), format!("{0}x{0}", r.dim())));
        }
    }

    let mut theta = SymMatrix::zeros(p);
    let mut singleton_obj = T::zero();
    let mut singleton_nnz = 0u64;
    let mut blocks = Vec::new();
    for (b, comp) in partition.components.iter().enumerate() {
        if let [i] = comp[..] {
            let v = singleton(s.get(i, i), pen).map_err(|e| Error::Block {
                block: b,
                source: Box::new(e),
            })?;
            theta.set(i, i, v);
            singleton_obj += -v.ln() + v * s.get(i, i) + pen.lambda1() * v.abs() + pen.lambda2() * v * v;
            singleton_nnz += u64::from(v.abs() > T::cast(NNZ_TOL));
        } else {
            blocks.push(b);
        }
    }

    let run = || {
        blocks
            .par_iter()
            .map(|&b| {
                let idx = &partition.components[b];
                solver
                    .restrict(idx, b)
                    .solve(&s.submatrix(idx), pen)
                    .map_err(|e| Error::Block {
                        block: b,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };

    for (&b, r) in blocks.iter().zip(&results) {
        let idx = &partition.components[b];
        for (a, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate().take(a + 1) {
                theta.set(i, j, r.theta_hat.get(a, c));
            }
        }
    }

    let trace = merge_traces(
        s,
        &partition,
        &blocks,
        &results,
        &theta,
        solver.reference(),
        singleton_obj,
        singleton_nnz,
    );
    let stop_reason = if results.iter().any(|r| r.stop_reason == StopReason::MaxIters) {
        StopReason::MaxIters
    } else if !results.is_empty() && results.iter().all(|r| r.stop_reason == StopReason::TargetReached) {
        StopReason::TargetReached
    } else {
        StopReason::Tolerance
    };
    Ok(SolveResult {
        kkt_residual: kkt_residual(&theta, s, pen, T::cast(KKT_ZERO_TOL))?,
        iterations: results.iter().map(|r| r.iterations).max().unwrap_or(0),
        restarts: results.iter().map(|r| r.restarts).sum(),
        converged: stop_reason != StopReason::MaxIters,
        stop_reason,
        trace,
        theta_hat: theta,
    })
}

/// Minimizer of `-log t + s t + lambda1 |t| + lambda2 t^2`.
fn singleton<T: Scalar>(s: T, pen: &ElasticNetPenalty<T>) -> Result<T> {
    let v = quadratic_root(s + pen.lambda1(), pen.lambda2());
    if v.is_finite() && v > T::zero() {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!(
            "no finite solution for an isolated variable with variance {s}"
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn merge_traces<T: Scalar>(
    s: &SymMatrix<T>,
    partition: &ComponentPartition,
    blocks: &[usize],
    results: &[SolveResult<T>],
    theta: &SymMatrix<T>,
    reference: Option<&SymMatrix<T>>,
    singleton_obj: T,
    singleton_nnz: u64,
) -> Vec<TraceRecord> {
    // Squared error outside the solved blocks is fixed, so the whole-matrix
    // error at step k follows from each block's relative error.
    let error_parts = reference.map(|r| {
        let norms: Vec<f64> = blocks
            .iter()
            .map(|&b| r.submatrix(&partition.components[b]).frobenius_norm().to_f64_lossy())
            .collect();
        let labels = partition.labels();
        let p = s.dim();
        let mut fixed = 0.0;
        for i in 0..p {
            for j in 0..p {
                let in_block = labels[i] == labels[j] && partition.components[labels[i]].len() > 1;
                if !in_block {
                    fixed += (theta.get(i, j) - r.get(i, j)).to_f64_lossy().powi(2);
                }
            }
        }
        (norms, fixed, r.frobenius_norm().to_f64_lossy())
    });
    let len = results.iter().map(|r| r.trace.len()).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            let recs: Vec<&TraceRecord> = results
                .iter()
                .filter_map(|r| r.trace.get(k).or_else(|| r.trace.last()))
                .collect();
            let active = results.iter().filter_map(|r| r.trace.get(k));
            let rel_error = error_parts.as_ref().map(|(norms, fixed, total)| {
                let sq: f64 = recs
                    .iter()
                    .zip(norms)
                    .map(|(t, n)| (t.rel_error.unwrap_or(0.0) * n).powi(2))
                    .sum();
                (sq + fixed).sqrt() / total
            });
            TraceRecord {
                iter: k as u64 + 1,
                elapsed_s: recs.iter().map(|t| t.elapsed_s).fold(0.0, f64::max),
                objective: recs.iter().map(|t| t.objective).sum::<f64>() + singleton_obj.to_f64_lossy(),
                step: recs.iter().map(|t| t.step).fold(0.0, f64::max),
                batch_n: active.clone().map(|t| t.batch_n).sum(),
                nnz: recs.iter().map(|t| t.nnz).sum::<u64>() + singleton_nnz,
                rel_change: active.map(|t| t.rel_change).fold(0.0, f64::max),
                rel_error,
            }
        })
        .collect()
}
