//! Bayesian optimization of noisy particle-filter log-likelihoods.
//!
//! The crate estimates the system-noise variance of a scalar random-walk
//! state-space model by maximizing a particle-filter log-likelihood estimate
//! with a Gaussian-process UCB loop, and measures the result against the
//! exact Kalman-filter maximum likelihood estimate.
//!
//! Modules, bottom-up:
//! - [`ssm`]: model abstraction, the linear Gaussian instance, simulation.
//! - [`kalman`]: exact log-likelihood and its maximizer.
//! - [`pfilter`]: particle filter, ESS, systematic resampling.
//! - [`gp`]: squared-exponential GP posterior.
//! - [`univar_opt`]: grid + Brent maximization on an interval.
//! - [`bo`]: normalizer, kappa schedule, UCB loop, convergence test.
//! - [`bench`]: replicated experiments, MSE curves and CSV exports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bo;
pub mod error;
pub mod gp;
pub mod kalman;
pub mod objective;
pub mod pfilter;
pub mod rng;
pub mod ssm;
pub mod univar_opt;

pub use error::{Error, Result};

/// Formats a float with 17 significant digits, enough to round-trip any
/// `f64` exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
