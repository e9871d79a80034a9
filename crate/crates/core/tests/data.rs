mod common;

use common::tight;
use precmat::data::io::{read_trace, write_trace, TraceFormat};
use precmat::data::{default_density, generate_synthetic, sample_covariance};
use precmat::linalg::{cholesky, eigenvalues};
use precmat::solver::{solve_stochastic, StochConfig};
use precmat::ElasticNetPenalty;
use proptest::prelude::*;

#[test]
fn synthetic_precisions_are_positive_definite() {
    for p in [20, 50, 100] {
        for seed in 0..50 {
            let prob = generate_synthetic::<f64>(p, default_density(p), 4.0, 1.0, seed).unwrap();
            assert!(cholesky(&prob.theta_star).is_ok(), "p={p} seed={seed}");
            assert_eq!(prob.s, sample_covariance(&prob.x, false));
        }
    }
}

#[test]
fn written_traces_are_monotone() {
    let prob = generate_synthetic::<f64>(25, default_density(25), 4.0, 1.0, 2).unwrap();
    let pen = ElasticNetPenalty::new(0.1, 0.9).unwrap();
    let det = precmat::solver::solve_deterministic(&prob.s, &pen, &tight(10.0, 1e-9)).unwrap();
    let stoch = solve_stochastic(&prob.s, &pen, &StochConfig { max_iters: 40, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (i, res) in [det, stoch].iter().enumerate() {
        for (name, fmt) in [("t.csv", TraceFormat::Csv), ("t.jsonl", TraceFormat::JsonLines)] {
            let path = dir.path().join(format!("{i}{name}"));
            write_trace(&path, &res.trace, fmt).unwrap();
            let back = read_trace(&path, fmt).unwrap();
            assert_eq!(back.len(), res.trace.len());
            for w in back.windows(2) {
                assert!(w[1].iter > w[0].iter);
                assert!(w[1].elapsed_s >= w[0].elapsed_s);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthetic_spectrum_floor_is_ell(seed in any::<u64>(), p in 2usize..40, ell in 0.1f64..5.0) {
        let prob = generate_synthetic::<f64>(p, default_density(p), 4.0, ell, seed).unwrap();
        let ev = eigenvalues(&prob.theta_star).unwrap();
        prop_assert!((ev[0] - ell).abs() <= 1e-10 * ev[ev.len() - 1].max(1.0));
        let sev = eigenvalues(&prob.s).unwrap();
        prop_assert!(sev[0] >= -1e-10);
    }
}
