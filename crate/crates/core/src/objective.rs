//! Objective functions of the variance parameter `theta = tau2`.

use crate::error::Result;
use crate::kalman::kalman_loglik;
use crate::pfilter::{pf_loglik, PFConfig, DEFAULT_ESS_FRACTION};
use crate::ssm::{LinearGaussianModel, TimeSeries};

/// A possibly noisy scalar objective. `seed` selects the random stream of a
/// single evaluation; deterministic objectives ignore it.
pub trait Objective {
    fn evaluate(&self, theta: f64, seed: u64) -> Result<f64>;
}

impl<F> Objective for F
where
    F: Fn(f64, u64) -> Result<f64>,
{
    fn evaluate(&self, theta: f64, seed: u64) -> Result<f64> {
        self(theta, seed)
    }
}

/// Exact, noise-free log-likelihood.
#[derive(Debug, Clone, Copy)]
pub struct KalmanObjective<'a> {
    pub series: &'a TimeSeries,
    pub model: LinearGaussianModel,
}

impl Objective for KalmanObjective<'_> {
    fn evaluate(&self, theta: f64, _seed: u64) -> Result<f64> {
        kalman_loglik(theta, self.series, &self.model)
    }
}

/// Particle-filter log-likelihood estimate with `particles` particles.
#[derive(Debug, Clone, Copy)]
pub struct ParticleObjective<'a> {
    pub series: &'a TimeSeries,
    pub model: LinearGaussianModel,
    pub particles: usize,
    pub ess_threshold_fraction: f64,
}

impl<'a> ParticleObjective<'a> {
    pub fn new(series: &'a TimeSeries, model: LinearGaussianModel, particles: usize) -> Self {
        Self {
            series,
            model,
            particles,
            ess_threshold_fraction: DEFAULT_ESS_FRACTION,
        }
    }
}

impl Objective for ParticleObjective<'_> {
    fn evaluate(&self, theta: f64, seed: u64) -> Result<f64> {
        let cfg = PFConfig {
            m: self.particles,
            ess_threshold_fraction: self.ess_threshold_fraction,
            seed,
        };
        pf_loglik(theta, self.series, &self.model, &cfg).map(|r| r.loglik)
    }
}
