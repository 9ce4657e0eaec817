//! Exact community recovery in the binary symmetric stochastic block model.
//!
//! The recovery pipeline is two-stage: a power method on the regularized
//! adjacency operator `B = A - rho 1 1^T` started from a random point on the
//! sphere, followed by the generalized power method `x <- sign(B x)` which
//! stops at the first fixed point. The crate also ships the model generator,
//! two baselines (spectral clustering and manifold gradient ascent on a rank-2
//! factorization) and a Monte-Carlo harness.

pub mod baselines;
pub mod error;
pub mod gpm;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod sbm;
pub mod spectral;

pub use error::{Error, Result};
pub use gpm::{two_stage_recover, LabelVector, RecoveryConfig, RecoveryResult};
pub use metrics::{is_exact, misclassification, rank_one_distance, Method, TrialRecord};
pub use sbm::{generate, generate_raw, GroundTruth, SbmGraph, SbmParams};
pub use spectral::{compute_rho, default_pm_iters, power_method, RegularizedOperator, UnitVector};
