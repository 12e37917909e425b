//! Replicated experiments: log-likelihood statistics across particle counts,
//! MSE curves of the BO incumbent against the exact MLE, and CSV exports.
//!
//! All randomness derives from `master_seed`:
//!
//! | stream | indices |
//! |--------|---------|
//! | simulated series | series seed (`SeriesSource::Simulate`) |
//! | log-likelihood statistics runs | `(m, probe, replicate)` |
//! | BO run of replicate `r` at particle count `m` | `(m, r)` |
//!
//! The BO stream does not depend on the GP hyperparameter cell, so every
//! `(sigma_n, length_scale)` cell of a replicate sees the same particle-filter
//! draws for its initial design.

mod config;
mod experiment;
mod export;
mod stats;

pub use config::{ExperimentConfig, ExperimentConfigFile, ModelBase, Profile, SeriesSource};
pub use experiment::{run_experiment, CellResult, CurveSet, ExperimentResult, MSECurves, RunResult};
pub use export::{
    export_tables, read_mse_curves, write_atomic, ExportFormat, ExportPaths, CONVERGENCE_FILE, INCUMBENTS_FILE,
    MSE_CURVES_FILE, RUNS_FILE, SNAPSHOT_FILE, SUMMARY_FILE, TABLE1_FILE, TABLE2_FILE, TRACES_FILE,
};
pub use stats::{loglik_stats, loglik_stats_with_seeds, LogLikStats, Moments, StatsRow};
