//! Elastic-net penalized precision matrix estimation.
//!
//! Solves `min -log det theta + Tr(theta S) + sum_ij (lambda1 |theta_ij| +
//! lambda2 theta_ij^2)` over positive definite `theta` with a deterministic
//! proximal gradient method, two stochastic variants that replace the
//! inverse by Monte Carlo covariance estimates, exact covariance
//! thresholding into independent blocks, and the closed-form ridge case.

pub mod bench;
pub mod bounds;
pub mod data;
pub mod error;
pub mod linalg;
pub mod penalty;
pub mod ridge;
pub mod sampler;
pub mod scalar;
pub mod solver;
pub mod threshold;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
pub use linalg::{Dense, SpdFactor, Spectrum, SymMatrix};
pub use penalty::ElasticNetPenalty;
pub use scalar::Scalar;

pub type SymMatrixF64 = SymMatrix<f64>;
pub type SymMatrixF32 = SymMatrix<f32>;
pub type DenseF64 = Dense<f64>;
pub type DenseF32 = Dense<f32>;
pub type SpdFactorF64 = SpdFactor<f64>;
pub type SpdFactorF32 = SpdFactor<f32>;
pub type PenaltyF64 = ElasticNetPenalty<f64>;
pub type PenaltyF32 = ElasticNetPenalty<f32>;
pub type SolveResultF64 = solver::SolveResult<f64>;
pub type SolveResultF32 = solver::SolveResult<f32>;
