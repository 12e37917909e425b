use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use pfbo::bench::Profile;
use pfbo::bo::DEFAULT_NORMALIZER_REPS;
use pfbo::pfilter::DEFAULT_ESS_FRACTION;
use pfbo::ssm;

mod commands;

/// Bayesian optimization of particle-filter likelihoods.
#[derive(Debug, Parser)]
#[command(name = "pfbo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the random-walk-plus-noise model and write the series as CSV.
    Simulate(SimulateArgs),
    /// Evaluate the log-likelihood of a series at one parameter value.
    Loglik(LoglikArgs),
    /// Run one Bayesian optimization and write its trace.
    Optimize(OptimizeArgs),
    /// Run a full Monte Carlo experiment and export its tables.
    Experiment(ExperimentArgs),
    /// Re-execute the command recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Observation noise variance.
    #[arg(long, default_value_t = ssm::DEFAULT_OBS_VAR)]
    pub obs_var: f64,
    /// Mean of the initial state.
    #[arg(long, default_value_t = ssm::DEFAULT_INIT_MEAN, allow_negative_numbers = true)]
    pub init_mean: f64,
    /// Variance of the initial state.
    #[arg(long, default_value_t = ssm::DEFAULT_INIT_VAR)]
    pub init_var: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// State noise variance.
    #[arg(long, default_value_t = ssm::DEFAULT_TAU2, allow_negative_numbers = true)]
    pub tau2: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Number of observations.
    #[arg(long, default_value_t = ssm::DEFAULT_LENGTH)]
    pub length: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Kalman,
    Pf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LoglikArgs {
    /// Series CSV (one column, optional `y` header).
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: f64,
    #[arg(long, value_enum, default_value_t = Engine::Kalman)]
    pub engine: Engine,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    pub particles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_ESS_FRACTION)]
    pub ess_frac: f64,
    /// Also print the per-step log-likelihood increments.
    #[arg(long)]
    pub per_step: bool,
    /// Write a manifest to this path.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.005, 0.025], allow_negative_numbers = true)]
    pub bounds: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    pub particles: usize,
    #[arg(long, default_value_t = 0.3)]
    pub sigma_n: f64,
    #[arg(long, default_value_t = 0.2)]
    pub length_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_f: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 30)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replicates per design point for the standardization constants.
    #[arg(long, default_value_t = DEFAULT_NORMALIZER_REPS)]
    pub normalizer_reps: usize,
    #[arg(long, default_value_t = DEFAULT_ESS_FRACTION)]
    pub ess_frac: f64,
    /// Stop at the first iteration passing the convergence test.
    #[arg(long)]
    pub stop_on_convergence: bool,
    /// Optimize the exact Kalman log-likelihood instead of the particle filter.
    #[arg(long)]
    pub oracle: bool,
    /// Output trace CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Desk,
    Paper,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Defaults for fields the configuration leaves out.
    #[arg(long, value_enum, default_value_t = ProfileArg::Desk)]
    pub profile: ProfileArg,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Loglik(a) => commands::loglik(&a),
        Command::Optimize(a) => commands::optimize(&a),
        Command::Experiment(a) => commands::experiment(&a),
        Command::Rerun(a) => commands::rerun(&a.manifest),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
