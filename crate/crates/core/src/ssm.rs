//! State-space models and observation series.
//!
//! A model pairs a latent Markov transition with a noisy observation density.
//! The concrete instance used throughout the crate is the scalar random walk
//! observed in Gaussian noise:
//!
//! ```text
//! x_0 ~ N(init_mean, init_var)
//! x_t = x_{t-1} + v_t,   v_t ~ N(0, tau2)
//! y_t = x_t + w_t,       w_t ~ N(0, obs_var)
//! ```

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Generic scalar-state model: initial draw, transition draw and observation
/// log-density. Sampling must be a pure function of the RNG stream.
pub trait StateSpaceModel {
    fn sample_initial<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64;

    fn sample_transition<R: rand::Rng + ?Sized>(&self, state: f64, rng: &mut R) -> f64;

    /// `log p(y | x)`, finite for finite arguments.
    fn observation_log_density(&self, state: f64, observation: f64) -> f64;
}

pub const DEFAULT_TAU2: f64 = 0.012;
pub const DEFAULT_OBS_VAR: f64 = 1.043;
pub const DEFAULT_INIT_MEAN: f64 = 0.0;
pub const DEFAULT_INIT_VAR: f64 = 4.0;
pub const DEFAULT_LENGTH: usize = 500;

/// Random walk plus Gaussian observation noise.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearGaussianModel {
    tau2: f64,
    obs_var: f64,
    init_mean: f64,
    init_var: f64,
}

impl Default for LinearGaussianModel {
    fn default() -> Self {
        Self {
            tau2: DEFAULT_TAU2,
            obs_var: DEFAULT_OBS_VAR,
            init_mean: DEFAULT_INIT_MEAN,
            init_var: DEFAULT_INIT_VAR,
        }
    }
}

impl LinearGaussianModel {
    pub fn new(tau2: f64, obs_var: f64, init_mean: f64, init_var: f64) -> Result<Self> {
        let model = Self {
            tau2,
            obs_var,
            init_mean,
            init_var,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.tau2, self.obs_var, self.init_mean, self.init_var]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::invalid("model parameters must be finite"));
        }
        if self.tau2 < 0.0 {
            return Err(Error::invalid(format!("tau2 must be >= 0, got {}", self.tau2)));
        }
        if self.obs_var <= 0.0 {
            return Err(Error::invalid(format!("obs_var must be > 0, got {}", self.obs_var)));
        }
        if self.init_var <= 0.0 {
            return Err(Error::invalid(format!("init_var must be > 0, got {}", self.init_var)));
        }
        Ok(())
    }

    /// Same model with the system noise variance replaced by `theta`.
    pub fn with_tau2(&self, theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta < 0.0 {
            return Err(Error::invalid(format!("theta must be finite and >= 0, got {theta}")));
        }
        Ok(Self { tau2: theta, ..*self })
    }

    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    pub fn obs_var(&self) -> f64 {
        self.obs_var
    }

    pub fn init_mean(&self) -> f64 {
        self.init_mean
    }

    pub fn init_var(&self) -> f64 {
        self.init_var
    }
}

impl StateSpaceModel for LinearGaussianModel {
    fn sample_initial<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.init_mean + self.init_var.sqrt() * z
    }

    #[inline]
    fn sample_transition<R: rand::Rng + ?Sized>(&self, state: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        state + self.tau2.sqrt() * z
    }

    #[inline]
    fn observation_log_density(&self, state: f64, observation: f64) -> f64 {
        let r = observation - state;
        -0.5 * ((2.0 * PI * self.obs_var).ln() + r * r / self.obs_var)
    }
}

/// Non-empty sequence of finite observations `y_1..y_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty series"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite observation {} at index {}",
                values[i],
                i + 1
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Single-column CSV with a `y` header, 17 significant digits, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(24 * (self.values.len() + 1));
        out.push_str("y\n");
        for &v in &self.values {
            out.push_str(&crate::fmt_f64(v));
            out.push('\n');
        }
        out
    }

    /// Parses the single-column CSV format. `origin` names the source in
    /// error messages.
    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if idx == 0 && line.eq_ignore_ascii_case("y") {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                message: format!("line {}: not a number: {line:?}", idx + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    message: format!("line {}: non-finite value {line:?}", idx + 1),
                });
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                message: "empty series".into(),
            });
        }
        Ok(Self { values })
    }
}

/// Reads a series from a single-column CSV file (optional `y` header).
pub fn load_series(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    TimeSeries::parse_csv(&text, path)
}

/// Draws `length` observations from `model`. Identical `(model, length, seed)`
/// give bit-identical output.
pub fn simulate(model: &LinearGaussianModel, length: usize, seed: u64) -> Result<TimeSeries> {
    model.validate()?;
    if length == 0 {
        return Err(Error::invalid("series length must be >= 1"));
    }
    let mut rng = rng::stream(seed, Purpose::Simulation, &[]);
    let obs_sd = model.obs_var.sqrt();
    let mut x = model.sample_initial(&mut rng);
    let values = (0..length)
        .map(|_| {
            x = model.sample_transition(x, &mut rng);
            let w: f64 = rng.sample(StandardNormal);
            x + obs_sd * w
        })
        .collect();
    TimeSeries::new(values)
}
