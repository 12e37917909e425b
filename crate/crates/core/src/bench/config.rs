use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bo::{self, BOConfig, Standardization};
use crate::error::{Error, Result};
use crate::gp::GPHyperParams;
use crate::pfilter::DEFAULT_ESS_FRACTION;
use crate::ssm::{self, LinearGaussianModel, TimeSeries};
use crate::univar_opt::{DEFAULT_BRENT_TOL, DEFAULT_GRID_POINTS};

/// Where the observation series comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawSeriesSource")]
pub enum SeriesSource {
    Simulate { tau2: f64, length: usize, seed: u64 },
    File { path: PathBuf },
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum SeriesKind {
    Simulate,
    File,
}

// Flat form so that field-level errors keep their path.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeriesSource {
    kind: SeriesKind,
    tau2: Option<f64>,
    length: Option<usize>,
    seed: Option<u64>,
    path: Option<PathBuf>,
}

impl TryFrom<RawSeriesSource> for SeriesSource {
    type Error = String;

    fn try_from(raw: RawSeriesSource) -> std::result::Result<Self, String> {
        let need = |name: &str, kind: &str| format!("missing field `{name}` for kind `{kind}`");
        let stray = |name: &str, kind: &str| format!("field `{name}` is not allowed for kind `{kind}`");
        match raw.kind {
            SeriesKind::Simulate => {
                if raw.path.is_some() {
                    return Err(stray("path", "simulate"));
                }
                Ok(SeriesSource::Simulate {
                    tau2: raw.tau2.ok_or_else(|| need("tau2", "simulate"))?,
                    length: raw.length.ok_or_else(|| need("length", "simulate"))?,
                    seed: raw.seed.ok_or_else(|| need("seed", "simulate"))?,
                })
            }
            SeriesKind::File => {
                for (name, set) in [
                    ("tau2", raw.tau2.is_some()),
                    ("length", raw.length.is_some()),
                    ("seed", raw.seed.is_some()),
                ] {
                    if set {
                        return Err(stray(name, "file"));
                    }
                }
                Ok(SeriesSource::File {
                    path: raw.path.ok_or_else(|| need("path", "file"))?,
                })
            }
        }
    }
}

/// Fixed parts of the model; `tau2` is the parameter being estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBase {
    pub obs_var: f64,
    pub init_mean: f64,
    pub init_var: f64,
}

impl Default for ModelBase {
    fn default() -> Self {
        Self {
            obs_var: ssm::DEFAULT_OBS_VAR,
            init_mean: ssm::DEFAULT_INIT_MEAN,
            init_var: ssm::DEFAULT_INIT_VAR,
        }
    }
}

impl ModelBase {
    pub fn model(&self, tau2: f64) -> Result<LinearGaussianModel> {
        LinearGaussianModel::new(tau2, self.obs_var, self.init_mean, self.init_var)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Minutes on one core: m in {1e3, 1e4}, 20 replicates, 30 iterations.
    Desk,
    /// Full grid: m up to 1e5, 100 replicates, 100 iterations.
    Paper,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub series: SeriesSource,
    pub model: ModelBase,
    pub particle_counts: Vec<usize>,
    pub sigma_n: Vec<f64>,
    pub length_scales: Vec<f64>,
    pub sigma_f: f64,
    pub repetitions: usize,
    pub iterations: usize,
    pub bounds: (f64, f64),
    pub delta: f64,
    pub init_points: Vec<f64>,
    pub eps_x: f64,
    pub eps_f: f64,
    pub patience: usize,
    pub grid_points: usize,
    pub brent_tol: f64,
    pub ess_threshold_fraction: f64,
    /// Particle-filter replicates per probe point for the statistics table
    /// and the normalizer.
    pub normalizer_reps: usize,
    pub mle_tol: f64,
    /// Iterations reported in the log-MSE table.
    pub table_iters: Vec<usize>,
    /// Iterations at which GP posterior snapshots are exported.
    pub snapshot_iters: Vec<usize>,
    pub snapshot_grid: usize,
    pub output_dir: Option<PathBuf>,
}

/// Experiment configuration as read from JSON: everything but the master
/// seed and the series source may be left to the profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfigFile {
    pub master_seed: u64,
    pub series: SeriesSource,
    pub model: Option<ModelBase>,
    pub particle_counts: Option<Vec<usize>>,
    pub sigma_n: Option<Vec<f64>>,
    pub length_scales: Option<Vec<f64>>,
    pub sigma_f: Option<f64>,
    pub repetitions: Option<usize>,
    pub iterations: Option<usize>,
    pub bounds: Option<(f64, f64)>,
    pub delta: Option<f64>,
    pub init_points: Option<Vec<f64>>,
    pub eps_x: Option<f64>,
    pub eps_f: Option<f64>,
    pub patience: Option<usize>,
    pub grid_points: Option<usize>,
    pub brent_tol: Option<f64>,
    pub ess_threshold_fraction: Option<f64>,
    pub normalizer_reps: Option<usize>,
    pub mle_tol: Option<f64>,
    pub table_iters: Option<Vec<usize>>,
    pub snapshot_iters: Option<Vec<usize>>,
    pub snapshot_grid: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl Default for SeriesSource {
    fn default() -> Self {
        SeriesSource::Simulate {
            tau2: ssm::DEFAULT_TAU2,
            length: ssm::DEFAULT_LENGTH,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    /// Profile defaults for a given seed and series.
    pub fn profile(profile: Profile, master_seed: u64, series: SeriesSource) -> Self {
        let bounds = bo::DEFAULT_BOUNDS;
        let common = Self {
            master_seed,
            series,
            model: ModelBase::default(),
            particle_counts: vec![1_000, 10_000],
            sigma_n: vec![0.3, 1.0],
            length_scales: vec![0.1, 0.2, 0.5],
            sigma_f: 1.0,
            repetitions: 20,
            iterations: 30,
            bounds,
            delta: bo::DEFAULT_DELTA,
            init_points: bo::default_init_points(bounds),
            eps_x: bo::DEFAULT_EPS_X,
            eps_f: bo::DEFAULT_EPS_F,
            patience: bo::DEFAULT_PATIENCE,
            grid_points: DEFAULT_GRID_POINTS,
            brent_tol: DEFAULT_BRENT_TOL,
            ess_threshold_fraction: DEFAULT_ESS_FRACTION,
            normalizer_reps: 30,
            mle_tol: 1e-10,
            table_iters: vec![10, 30],
            snapshot_iters: vec![1, 3, 5, 10, 30],
            snapshot_grid: 101,
            output_dir: None,
        };
        match profile {
            Profile::Desk => common,
            Profile::Paper => Self {
                particle_counts: vec![1_000, 10_000, 100_000],
                sigma_n: vec![0.2, 0.3, 0.5, 1.0, 2.0],
                length_scales: vec![0.1, 0.2, 0.3, 0.5, 1.0],
                repetitions: 100,
                iterations: 100,
                normalizer_reps: 100,
                table_iters: vec![10, 100],
                snapshot_iters: vec![1, 3, 5, 10, 30, 100],
                ..common
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::invalid(format!("{name} must not be empty")))
            } else {
                Ok(())
            }
        };
        nonempty("particle_counts", self.particle_counts.len())?;
        nonempty("sigma_n", self.sigma_n.len())?;
        nonempty("length_scales", self.length_scales.len())?;
        if self.particle_counts.contains(&0) {
            return Err(Error::invalid("particle_counts must be >= 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be >= 1"));
        }
        if self.normalizer_reps < 2 {
            return Err(Error::invalid("normalizer_reps must be >= 2"));
        }
        if !(self.mle_tol > 0.0) {
            return Err(Error::invalid("mle_tol must be > 0"));
        }
        if self.snapshot_grid < 2 {
            return Err(Error::invalid("snapshot_grid must be >= 2"));
        }
        if let SeriesSource::Simulate { tau2, length, .. } = self.series {
            self.model.model(tau2)?;
            if length == 0 {
                return Err(Error::invalid("series.length must be >= 1"));
            }
        }
        self.model.model(0.0)?;
        for &sigma_n in &self.sigma_n {
            for &l in &self.length_scales {
                self.bo_config(sigma_n, l, 0, Standardization::Fixed { mean: 0.0, scale: 1.0 })?
                    .validate()?;
            }
        }
        Ok(())
    }

    /// BO settings for one hyperparameter cell and replicate seed.
    pub fn bo_config(
        &self,
        sigma_n: f64,
        length_scale: f64,
        seed: u64,
        standardization: Standardization,
    ) -> Result<BOConfig> {
        Ok(BOConfig {
            bounds: self.bounds,
            hp: GPHyperParams::new(self.sigma_f, length_scale, sigma_n)?,
            delta: self.delta,
            max_iters: self.iterations,
            init_points: self.init_points.clone(),
            eps_x: self.eps_x,
            eps_f: self.eps_f,
            patience: self.patience,
            grid_points: self.grid_points,
            brent_tol: self.brent_tol,
            seed,
            standardization,
            stop_on_convergence: false,
            constant_kappa: None,
        })
    }

    /// Loads or simulates the observation series.
    pub fn load_series(&self) -> Result<TimeSeries> {
        match &self.series {
            SeriesSource::Simulate { tau2, length, seed } => ssm::simulate(&self.model.model(*tau2)?, *length, *seed),
            SeriesSource::File { path } => ssm::load_series(path),
        }
    }
}

impl ExperimentConfigFile {
    /// Overlays the file's values on the profile defaults.
    pub fn resolve(self, profile: Profile) -> ExperimentConfig {
        let d = ExperimentConfig::profile(profile, self.master_seed, self.series);
        ExperimentConfig {
            master_seed: d.master_seed,
            series: d.series,
            model: self.model.unwrap_or(d.model),
            particle_counts: self.particle_counts.unwrap_or(d.particle_counts),
            sigma_n: self.sigma_n.unwrap_or(d.sigma_n),
            length_scales: self.length_scales.unwrap_or(d.length_scales),
            sigma_f: self.sigma_f.unwrap_or(d.sigma_f),
            repetitions: self.repetitions.unwrap_or(d.repetitions),
            iterations: self.iterations.unwrap_or(d.iterations),
            // default design follows the bounds unless given explicitly
            init_points: self
                .init_points
                .unwrap_or_else(|| bo::default_init_points(self.bounds.unwrap_or(d.bounds))),
            bounds: self.bounds.unwrap_or(d.bounds),
            delta: self.delta.unwrap_or(d.delta),
            eps_x: self.eps_x.unwrap_or(d.eps_x),
            eps_f: self.eps_f.unwrap_or(d.eps_f),
            patience: self.patience.unwrap_or(d.patience),
            grid_points: self.grid_points.unwrap_or(d.grid_points),
            brent_tol: self.brent_tol.unwrap_or(d.brent_tol),
            ess_threshold_fraction: self.ess_threshold_fraction.unwrap_or(d.ess_threshold_fraction),
            normalizer_reps: self.normalizer_reps.unwrap_or(d.normalizer_reps),
            mle_tol: self.mle_tol.unwrap_or(d.mle_tol),
            table_iters: self.table_iters.unwrap_or(d.table_iters),
            snapshot_iters: self.snapshot_iters.unwrap_or(d.snapshot_iters),
            snapshot_grid: self.snapshot_grid.unwrap_or(d.snapshot_grid),
            output_dir: self.output_dir.or(d.output_dir),
        }
    }
}
