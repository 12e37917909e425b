use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kalman::kalman_loglik;
use crate::pfilter::{pf_loglik, PFConfig};
use crate::rng::{derive_seed, Purpose};
use crate::ssm::{LinearGaussianModel, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Unbiased sample variance.
    pub var: f64,
    pub sd: f64,
}

impl Moments {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            var,
            sd: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub m: usize,
    /// One entry per theta probe.
    pub cells: Vec<Moments>,
    /// Raw replicate log-likelihoods, `samples[probe][replicate]`.
    pub samples: Vec<Vec<f64>>,
}

/// Replicated particle-filter log-likelihoods per `(m, theta)` with the exact
/// Kalman value for reference.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogLikStats {
    pub thetas: Vec<f64>,
    pub rows: Vec<StatsRow>,
    pub kalman: Vec<f64>,
}

impl LogLikStats {
    pub fn row(&self, m: usize) -> Option<&StatsRow> {
        self.rows.iter().find(|r| r.m == m)
    }
}

/// `R` independent particle-filter runs per `(m, theta)`; replicate seeds are
/// derived from `seed` and `(m, probe index, replicate)`.
pub fn loglik_stats(
    series: &TimeSeries,
    model_base: &LinearGaussianModel,
    m_list: &[usize],
    theta_probes: &[f64],
    reps: usize,
    ess_threshold_fraction: f64,
    seed: u64,
) -> Result<LogLikStats> {
    loglik_stats_with_seeds(
        series,
        model_base,
        m_list,
        theta_probes,
        reps,
        ess_threshold_fraction,
        |m, p, r| derive_seed(seed, Purpose::LoglikStats, &[m as u64, p as u64, r as u64]),
    )
}

/// Same as [`loglik_stats`] with caller-chosen replicate seeds
/// `seed_of(m, probe index, replicate)`.
pub fn loglik_stats_with_seeds<S>(
    series: &TimeSeries,
    model_base: &LinearGaussianModel,
    m_list: &[usize],
    theta_probes: &[f64],
    reps: usize,
    ess_threshold_fraction: f64,
    seed_of: S,
) -> Result<LogLikStats>
where
    S: Fn(usize, usize, usize) -> u64 + Sync,
{
    if reps < 2 {
        return Err(Error::invalid(format!("need at least 2 replicates, got {reps}")));
    }
    let kalman = theta_probes
        .iter()
        .map(|&theta| kalman_loglik(theta, series, model_base))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize, usize)> = m_list
        .iter()
        .flat_map(|&m| (0..theta_probes.len()).flat_map(move |p| (0..reps).map(move |r| (m, p, r))))
        .collect();
    let values = jobs
        .par_iter()
        .map(|&(m, p, r)| {
            let cfg = PFConfig {
                m,
                ess_threshold_fraction,
                seed: seed_of(m, p, r),
            };
            pf_loglik(theta_probes[p], series, model_base, &cfg)
                .map(|res| res.loglik)
                .map_err(|e| e.context(format!("m={m}, theta={}, replicate {r}", theta_probes[p])))
        })
        .collect::<Result<Vec<f64>>>()?;

    let per_m = theta_probes.len() * reps;
    let rows = m_list
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let block = &values[i * per_m..(i + 1) * per_m];
            let samples: Vec<Vec<f64>> = block.chunks(reps).map(<[f64]>::to_vec).collect();
            StatsRow {
                m,
                cells: samples.iter().map(|s| Moments::of(s)).collect(),
                samples,
            }
        })
        .collect();
    Ok(LogLikStats {
        thetas: theta_probes.to_vec(),
        rows,
        kalman,
    })
}
