//! Bootstrap particle filter and its log-likelihood estimator.
//!
//! Each step propagates the particles through the transition, scores them
//! against the observation, and accumulates
//! `log sum_i w_{t-1}^(i) p(y_t | x_t^(i))` using a max-shift so that
//! products of small densities never underflow. Systematic resampling is
//! triggered when the effective sample size drops below a fixed fraction of
//! the particle count.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::ssm::{LinearGaussianModel, StateSpaceModel, TimeSeries};

pub const DEFAULT_ESS_FRACTION: f64 = 0.5;

/// Weighted particle approximation of a filtering distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub particles: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ParticleState {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn ess(&self) -> Result<f64> {
        ess(&self.weights)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PFConfig {
    /// Particle count.
    pub m: usize,
    /// Resample when ESS < fraction * m.
    pub ess_threshold_fraction: f64,
    pub seed: u64,
}

impl PFConfig {
    pub fn new(m: usize, seed: u64) -> Self {
        Self {
            m,
            ess_threshold_fraction: DEFAULT_ESS_FRACTION,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("particle count must be >= 1"));
        }
        let f = self.ess_threshold_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::invalid(format!(
                "ESS threshold fraction must lie in (0, 1], got {f}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PFResult {
    pub loglik: f64,
    /// `log p_hat(y_t | y_{1:t-1})` for each step.
    pub per_step_loglik: Vec<f64>,
    /// Number of resampling events.
    pub resamples: usize,
}

fn check_normalized(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::invalid("weight list is empty"));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights must be non-negative"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("weights must sum to 1, got {sum}")));
    }
    Ok(())
}

/// Effective sample size `1 / sum w_i^2` of normalized weights.
pub fn ess(weights: &[f64]) -> Result<f64> {
    check_normalized(weights)?;
    Ok(ess_unchecked(weights))
}

#[inline]
fn ess_unchecked(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling with offset `u`: ancestor `j` is the weight cell
/// containing `(u + j) / m`. Returns `m` sorted indices.
pub fn systematic_resample(weights: &[f64], u: f64) -> Result<Vec<usize>> {
    check_normalized(weights)?;
    if !(0.0..1.0).contains(&u) {
        return Err(Error::invalid(format!("resampling offset must lie in [0, 1), got {u}")));
    }
    let mut out = Vec::with_capacity(weights.len());
    systematic_into(weights, u, &mut out);
    Ok(out)
}

fn systematic_into(weights: &[f64], u: f64, out: &mut Vec<usize>) {
    let m = weights.len();
    out.clear();
    let step = 1.0 / m as f64;
    let mut cumulative = weights[0];
    let mut i = 0;
    for j in 0..m {
        let position = (u + j as f64) * step;
        while position >= cumulative && i + 1 < m {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
    }
}

/// Runs the filter for any scalar-state model, returning the estimated
/// log-likelihood and the final particle cloud.
pub fn run_filter<M: StateSpaceModel>(
    model: &M,
    series: &TimeSeries,
    cfg: &PFConfig,
) -> Result<(PFResult, ParticleState)> {
    cfg.validate()?;
    let m = cfg.m;
    let mut rng = rng::stream(cfg.seed, Purpose::ParticleFilter, &[]);
    let threshold = cfg.ess_threshold_fraction * m as f64;
    let uniform = 1.0 / m as f64;

    let mut particles: Vec<f64> = (0..m).map(|_| model.sample_initial(&mut rng)).collect();
    let mut weights = vec![uniform; m];
    let mut loglik_buf = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    let mut ancestors = Vec::with_capacity(m);
    let mut per_step = Vec::with_capacity(series.len());
    let mut resamples = 0;

    for (t, &y) in series.values().iter().enumerate() {
        for x in particles.iter_mut() {
            *x = model.sample_transition(*x, &mut rng);
        }
        let mut max_ll = f64::NEG_INFINITY;
        for ((ll, &x), &w) in loglik_buf.iter_mut().zip(&particles).zip(&weights) {
            *ll = model.observation_log_density(x, y);
            if w > 0.0 && *ll > max_ll {
                max_ll = *ll;
            }
        }
        if !max_ll.is_finite() {
            return Err(Error::Degeneracy { step: t + 1 });
        }
        // w_t ∝ w_{t-1} p(y_t | x_t), shifted by the largest log density
        let mut total = 0.0;
        for (w, &ll) in weights.iter_mut().zip(&loglik_buf) {
            *w *= (ll - max_ll).exp();
            total += *w;
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Degeneracy { step: t + 1 });
        }
        per_step.push(max_ll + total.ln());
        let inv = 1.0 / total;
        for w in weights.iter_mut() {
            *w *= inv;
        }

        if ess_unchecked(&weights) < threshold {
            let u: f64 = rng.random();
            systematic_into(&weights, u, &mut ancestors);
            for (dst, &a) in scratch.iter_mut().zip(&ancestors) {
                *dst = particles[a];
            }
            std::mem::swap(&mut particles, &mut scratch);
            weights.fill(uniform);
            resamples += 1;
        }
    }

    let loglik = per_step.iter().sum();
    Ok((
        PFResult {
            loglik,
            per_step_loglik: per_step,
            resamples,
        },
        ParticleState { particles, weights },
    ))
}

/// Particle-filter estimate of the log-likelihood at `tau2 = theta`.
/// Deterministic given `cfg.seed`.
pub fn pf_loglik(
    theta: f64,
    series: &TimeSeries,
    model_base: &LinearGaussianModel,
    cfg: &PFConfig,
) -> Result<PFResult> {
    let model = model_base.with_tau2(theta)?;
    run_filter(&model, series, cfg).map(|(r, _)| r)
}
