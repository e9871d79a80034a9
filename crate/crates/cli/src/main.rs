use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use precmat::bench::{bench_csv, run_bench, Algorithm, BenchConfig};
use precmat::data::io::{self, MatrixFormat, TraceFormat};
use precmat::data::{default_density, generate_synthetic, sample_covariance, DatasetMatrix};
use precmat::penalty::{kkt_residual, objective, KKT_ZERO_TOL};
use precmat::ridge::solve_ridge_from_data;
use precmat::solver::{AveragingSchedule, BatchSchedule, DetSolverConfig, SolveResult, StochConfig};
use precmat::threshold::{solve_blockwise, threshold_components, SolverChoice};
use precmat::{ElasticNetPenalty, Error, SymMatrix};

#[derive(Parser)]
#[command(name = "precmat", version, about = "Elastic-net penalized precision matrix estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a precision matrix from a covariance (or data) file.
    Solve(SolveArgs),
    /// Closed-form solution for alpha = 0.
    Ridge(RidgeArgs),
    /// Print the thresholded connected components as JSON.
    Split(SplitArgs),
    /// Generate a sparse ground truth, a Gaussian sample and its covariance.
    Simulate(SimulateArgs),
    /// Time-to-tolerance table on synthetic problems.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Det,
    Stoch,
    Averaged,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Det => Algorithm::Det,
            AlgorithmArg::Stoch => Algorithm::Stoch,
            AlgorithmArg::Averaged => Algorithm::Averaged,
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Matrix file: a p x p covariance, or an n x p data matrix with --data.
    #[arg(long)]
    input: PathBuf,
    /// Input format; inferred from the extension (.pmat/.bin are binary).
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Skip the first line of a CSV input.
    #[arg(long)]
    header: bool,
    /// Treat the input as samples (rows) and use S = X^T X / n.
    #[arg(long)]
    data: bool,
    /// Subtract column means before forming S (with --data).
    #[arg(long, requires = "data")]
    center: bool,
}

impl InputArgs {
    fn matrix_format(&self) -> MatrixFormat {
        format_or_infer(self.format, &self.input)
    }

    fn dataset(&self) -> precmat::Result<DatasetMatrix<f64>> {
        let x = io::read_dataset(&self.input, self.matrix_format(), self.header)?;
        if !self.center {
            return Ok(x);
        }
        let v = x.into_dense();
        let (n, p) = (v.rows(), v.cols());
        let means: Vec<f64> = (0..p).map(|j| (0..n).map(|i| v.get(i, j)).sum::<f64>() / n as f64).collect();
        DatasetMatrix::new(precmat::Dense::from_fn(n, p, |i, j| v.get(i, j) - means[j]))
    }

    fn covariance(&self) -> precmat::Result<SymMatrix<f64>> {
        if self.data {
            Ok(sample_covariance(&self.dataset()?, false))
        } else {
            io::read_covariance(&self.input, self.matrix_format(), self.header)
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Overall penalty strength (> 0).
    #[arg(long)]
    lambda: f64,
    /// l1 share of the penalty, in [0, 1].
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "det")]
    algorithm: AlgorithmArg,
    /// Initial step size; halved on every restart.
    #[arg(long, default_value_t = 10.0)]
    gamma0: f64,
    /// Batch schedule base for stoch: N_k = ceil(base + k^q).
    #[arg(long, default_value_t = 30.0)]
    batch_base: f64,
    /// Batch schedule exponent q (> 1) for stoch.
    #[arg(long, default_value_t = 1.8)]
    batch_q: f64,
    /// Draws per iteration for averaged.
    #[arg(long, default_value_t = 400)]
    fixed_n: usize,
    /// Averaging weights zeta_k = k^-decay for averaged, decay in (0.5, 1].
    #[arg(long, default_value_t = 0.7)]
    zeta_decay: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration cap (default 10000 for det, 1000 otherwise).
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative change stopping tolerance (default 1e-8 for det, 1e-4 otherwise).
    #[arg(long)]
    tol: Option<f64>,
    /// Solve each thresholded component separately.
    #[arg(long)]
    split: bool,
    /// Worker threads for --split (default: all cores).
    #[arg(long, env = "PRECMAT_THREADS")]
    threads: Option<usize>,
    /// Per-iteration trace (.csv, or .jsonl for JSON lines).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Where to write the estimate (.csv, or .pmat/.bin for binary).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Known solution; adds relative error to the trace.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Safe step ell_star^2 and a start clipped into the spectral box (det only).
    #[arg(long)]
    guaranteed: bool,
}

#[derive(Args)]
struct RidgeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Penalty strength (> 0); the objective adds (lambda / 2) ||theta||_F^2.
    #[arg(long)]
    lambda: f64,
    /// Where to write the estimate (.csv, or .pmat/.bin for binary).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    alpha: f64,
    /// Write the JSON here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Dimension.
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Off-diagonal nonzero proportion of the ground truth (default 10 / p).
    #[arg(long)]
    density: Option<f64>,
    /// Added to nonzero magnitudes.
    #[arg(long, default_value_t = 4.0)]
    magnitude: f64,
    /// Smallest eigenvalue of the ground truth.
    #[arg(long, default_value_t = 1.0)]
    ell: f64,
    /// Directory for theta_star, x and s.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args)]
struct BenchArgs {
    /// Dimensions, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    p_list: Vec<usize>,
    /// Number of instances per dimension (seeds 0..n).
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Algorithms, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "det,stoch,averaged")]
    algorithms: Vec<AlgorithmArg>,
    /// Relative error to the reference at which timing stops.
    #[arg(long, default_value_t = 0.1)]
    target_tol: f64,
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    /// Fixed penalty (default: tuned to solution density 10 / p).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    gamma0: f64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    /// Write the table here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn format_or_infer(arg: Option<FormatArg>, path: &Path) -> MatrixFormat {
    match arg {
        Some(FormatArg::Csv) => MatrixFormat::Csv,
        Some(FormatArg::Binary) => MatrixFormat::Binary,
        None => MatrixFormat::from_path(path),
    }
}

/// Solver failures exit with 1, anything about the input with 2.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MaxRestartsExceeded { .. }
        | Error::NonFiniteObjective { .. }
        | Error::ConvergenceFailure { .. }
        | Error::NotPositiveDefinite { .. } => 1,
        Error::Block { source, .. } => exit_code(source),
        _ => 2,
    }
}

fn summary(converged: bool, iters: u64, restarts: usize, obj: f64, kkt: f64, secs: f64) -> String {
    format!("converged={converged} iters={iters} restarts={restarts} obj={obj} kkt={kkt:e} secs={secs:.6}")
}

fn run_solve(a: &SolveArgs) -> precmat::Result<bool> {
    let s = a.input.covariance()?;
    let pen = ElasticNetPenalty::new(a.lambda, a.alpha)?;
    let reference = match &a.reference {
        Some(path) => Some(io::read_covariance(path, MatrixFormat::from_path(path), false)?),
        None => None,
    };
    if a.guaranteed && !matches!(a.algorithm, AlgorithmArg::Det) {
        return Err(Error::InvalidArgument("--guaranteed applies to --algorithm det only".into()));
    }
    if !(a.gamma0 > 0.0 && a.gamma0.is_finite()) {
        return Err(Error::InvalidArgument(format!("--gamma0 must be positive, got {}", a.gamma0)));
    }

    let choice = match a.algorithm {
        AlgorithmArg::Det => {
            let d = DetSolverConfig::default();
            SolverChoice::Deterministic(DetSolverConfig {
                gamma0: Some(a.gamma0),
                guaranteed: a.guaranteed,
                max_iters: a.max_iters.unwrap_or(d.max_iters),
                rel_tol: a.tol.unwrap_or(d.rel_tol),
                reference,
                ..d
            })
        }
        AlgorithmArg::Stoch | AlgorithmArg::Averaged => {
            let d = StochConfig::default();
            let cfg = StochConfig {
                gamma0: Some(a.gamma0),
                max_iters: a.max_iters.unwrap_or(d.max_iters),
                rel_tol: a.tol.unwrap_or(d.rel_tol),
                seed: a.seed,
                batch: BatchSchedule::new(a.batch_base, a.batch_q)?,
                fixed_n: a.fixed_n,
                averaging: AveragingSchedule::new(1.0, a.zeta_decay)?,
                reference,
                ..d
            };
            if matches!(a.algorithm, AlgorithmArg::Stoch) {
                SolverChoice::Stochastic(cfg)
            } else {
                SolverChoice::Averaged(cfg)
            }
        }
    };

    let start = Instant::now();
    let res: SolveResult<f64> = if a.split {
        solve_blockwise(&s, &pen, &choice, a.threads)?
    } else {
        choice.solve(&s, &pen)?
    };
    let secs = start.elapsed().as_secs_f64();

    if let Some(path) = &a.output {
        io::write_sym(path, &res.theta_hat, MatrixFormat::from_path(path))?;
    }
    if let Some(path) = &a.trace {
        io::write_trace(path, &res.trace, TraceFormat::from_path(path))?;
    }
    println!(
        "{}",
        summary(
            res.converged,
            res.iterations as u64,
            res.restarts,
            res.final_objective(),
            res.kkt_residual,
            secs
        )
    );
    Ok(res.converged)
}

fn run_ridge(a: &RidgeArgs) -> precmat::Result<bool> {
    let start = Instant::now();
    let (s, sol) = if a.input.data {
        let x = a.input.dataset()?;
        (sample_covariance(&x, false), solve_ridge_from_data(&x, a.lambda)?)
    } else {
        let s = a.input.covariance()?;
        let sol = precmat::ridge::solve_ridge_exact(&s, a.lambda)?;
        (s, sol)
    };
    let secs = start.elapsed().as_secs_f64();
    let pen = ElasticNetPenalty::new(a.lambda, 0.0)?;
    let kkt = kkt_residual(&sol.theta_hat, &s, &pen, KKT_ZERO_TOL)?;
    if let Some(path) = &a.output {
        io::write_sym(path, &sol.theta_hat, MatrixFormat::from_path(path))?;
    }
    println!("{}", summary(true, 0, 0, objective(&sol.theta_hat, &s, &pen), kkt, secs));
    Ok(true)
}

fn run_split(a: &SplitArgs) -> precmat::Result<bool> {
    let s = a.input.covariance()?;
    let pen = ElasticNetPenalty::new(a.lambda, a.alpha)?;
    let part = threshold_components(&s, &pen);
    let json = serde_json::json!({
        "alpha_lambda": pen.lambda1(),
        "components": part.components,
    });
    let text = format!("{json}\n");
    match &a.output {
        Some(path) => io::write_atomic(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(true)
}

fn run_simulate(a: &SimulateArgs) -> precmat::Result<bool> {
    let density = a.density.unwrap_or_else(|| default_density(a.p));
    let prob = generate_synthetic::<f64>(a.p, density, a.magnitude, a.ell, a.seed)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let (fmt, ext) = match a.format {
        FormatArg::Csv => (MatrixFormat::Csv, "csv"),
        FormatArg::Binary => (MatrixFormat::Binary, "pmat"),
    };
    let path = |name: &str| a.out_dir.join(format!("{name}.{ext}"));
    io::write_sym(&path("theta_star"), &prob.theta_star, fmt)?;
    io::write_dense(&path("x"), prob.x.values(), fmt)?;
    io::write_sym(&path("s"), &prob.s, fmt)?;
    for name in ["theta_star", "x", "s"] {
        println!("{}", path(name).display());
    }
    Ok(true)
}

fn run_bench_cmd(a: &BenchArgs) -> precmat::Result<bool> {
    let cfg = BenchConfig {
        p_list: a.p_list.clone(),
        seeds: a.seeds,
        algorithms: a.algorithms.iter().map(|&x| x.into()).collect(),
        target_tol: a.target_tol,
        alpha: a.alpha,
        lambda: a.lambda,
        gamma0: a.gamma0,
        max_iters: a.max_iters,
        ..Default::default()
    };
    let rows = run_bench(&cfg, |r| eprintln!("{}", r.csv()))?;
    let table = bench_csv(&rows);
    match &a.output {
        Some(path) => io::write_atomic(path, table.as_bytes())?,
        None => print!("{table}"),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Ridge(a) => run_ridge(a),
        Command::Split(a) => run_split(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Bench(a) => run_bench_cmd(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
