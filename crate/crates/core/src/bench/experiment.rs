use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::stats::{loglik_stats, LogLikStats};
use crate::bo::{bo_run, BOTrace, Normalizer, Standardization};
use crate::error::Result;
use crate::kalman::{kalman_loglik, kalman_mle, MLEResult};
use crate::objective::ParticleObjective;
use crate::rng::{derive_seed, Purpose};

/// One BO replicate with the exact log-likelihood of each incumbent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub replicate: usize,
    pub trace: BOTrace,
    /// Incumbent after `i` acquisition iterations, `i = 0..=budget`.
    pub incumbent_theta: Vec<f64>,
    /// Exact log-likelihood at each incumbent.
    pub incumbent_loglik: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub m: usize,
    pub sigma_n: f64,
    pub length_scale: f64,
    pub normalizer: Normalizer,
    pub runs: Vec<RunResult>,
}

/// Per-iteration mean squared errors for one `(m, sigma_n, length_scale)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub m: usize,
    pub sigma_n: f64,
    pub length_scale: f64,
    /// `mean_r (theta_hat_i - theta*)^2`
    pub mse_x: Vec<f64>,
    /// `mean_r (l(theta_hat_i) - l(theta*))^2`
    pub mse_f: Vec<f64>,
}

impl CurveSet {
    pub fn log10_mse_x(&self) -> Vec<f64> {
        self.mse_x.iter().map(|v| v.log10()).collect()
    }

    pub fn log10_mse_f(&self) -> Vec<f64> {
        self.mse_f.iter().map(|v| v.log10()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MSECurves {
    pub cells: Vec<CurveSet>,
}

impl MSECurves {
    pub fn from_cells(cells: &[CellResult], mle: &MLEResult) -> Self {
        let cells = cells
            .iter()
            .map(|c| {
                let len = c.runs.iter().map(|r| r.incumbent_theta.len()).min().unwrap_or(0);
                let n = c.runs.len() as f64;
                let mean_over =
                    |f: &dyn Fn(&RunResult, usize) -> f64, i: usize| c.runs.iter().map(|r| f(r, i)).sum::<f64>() / n;
                CurveSet {
                    m: c.m,
                    sigma_n: c.sigma_n,
                    length_scale: c.length_scale,
                    mse_x: (0..len)
                        .map(|i| mean_over(&|r, i| (r.incumbent_theta[i] - mle.theta_star).powi(2), i))
                        .collect(),
                    mse_f: (0..len)
                        .map(|i| mean_over(&|r, i| (r.incumbent_loglik[i] - mle.loglik_star).powi(2), i))
                        .collect(),
                }
            })
            .collect();
        Self { cells }
    }

    pub fn cell(&self, m: usize, sigma_n: f64, length_scale: f64) -> Option<&CurveSet> {
        self.cells
            .iter()
            .find(|c| c.m == m && c.sigma_n == sigma_n && c.length_scale == length_scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub mle: MLEResult,
    pub stats: LogLikStats,
    pub cells: Vec<CellResult>,
    pub curves: MSECurves,
}

/// Runs the full protocol: exact MLE, replicated log-likelihood statistics
/// (which also provide the per-`m` normalizer), then `repetitions` BO runs
/// for every `(m, sigma_n, length_scale)` cell.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let series = cfg.load_series()?;
    let model = cfg.model.model(0.0)?;
    let mle = kalman_mle(&series, cfg.bounds, &model, cfg.mle_tol)?;
    let stats = loglik_stats(
        &series,
        &model,
        &cfg.particle_counts,
        &cfg.init_points,
        cfg.normalizer_reps,
        cfg.ess_threshold_fraction,
        cfg.master_seed,
    )?;

    let mut cell_specs = Vec::new();
    for (row, &m) in stats.rows.iter().zip(&cfg.particle_counts) {
        let normalizer = Normalizer::from_groups(&row.samples)?;
        for &sigma_n in &cfg.sigma_n {
            for &length_scale in &cfg.length_scales {
                cell_specs.push((m, sigma_n, length_scale, normalizer));
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cell_specs.len())
        .flat_map(|c| (0..cfg.repetitions).map(move |r| (c, r)))
        .collect();

    let runs = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (m, sigma_n, length_scale, normalizer) = cell_specs[c];
            let context = || format!("cell (m={m}, sigma_n={sigma_n}, length_scale={length_scale}), replicate {r}");
            let seed = derive_seed(cfg.master_seed, Purpose::Replicate, &[m as u64, r as u64]);
            let bo_cfg = cfg.bo_config(
                sigma_n,
                length_scale,
                seed,
                Standardization::Fixed {
                    mean: normalizer.mean,
                    scale: normalizer.scale,
                },
            )?;
            let objective = ParticleObjective {
                ess_threshold_fraction: cfg.ess_threshold_fraction,
                ..ParticleObjective::new(&series, model, m)
            };
            let trace = bo_run(&objective, &bo_cfg).map_err(|e| e.context(context()))?;
            let incumbent_theta: Vec<f64> = trace.incumbents().iter().map(|rec| rec.incumbent_x).collect();
            let incumbent_loglik = incumbent_theta
                .iter()
                .map(|&theta| kalman_loglik(theta, &series, &model))
                .collect::<Result<Vec<_>>>()?;
            Ok(RunResult {
                replicate: r,
                trace,
                incumbent_theta,
                incumbent_loglik,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut runs = runs.into_iter();
    let cells: Vec<CellResult> = cell_specs
        .iter()
        .map(|&(m, sigma_n, length_scale, normalizer)| CellResult {
            m,
            sigma_n,
            length_scale,
            normalizer,
            runs: runs.by_ref().take(cfg.repetitions).collect(),
        })
        .collect();
    let curves = MSECurves::from_cells(&cells, &mle);
    Ok(ExperimentResult {
        config: cfg.clone(),
        mle,
        stats,
        cells,
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{Profile, SeriesSource};

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            particle_counts: vec![100],
            sigma_n: vec![0.3, 1.0],
            length_scales: vec![0.2],
            repetitions: 3,
            iterations: 4,
            normalizer_reps: 4,
            grid_points: 51,
            ..ExperimentConfig::profile(
                Profile::Desk,
                5,
                SeriesSource::Simulate {
                    tau2: 0.012,
                    length: 80,
                    seed: 2,
                },
            )
        }
    }

    #[test]
    fn shapes_and_zero_error_at_optimum() {
        let res = run_experiment(&tiny()).unwrap();
        assert_eq!(res.cells.len(), 2);
        for c in &res.curves.cells {
            assert_eq!(c.mse_x.len(), 5);
            assert!(c.mse_x.iter().chain(&c.mse_f).all(|v| *v >= 0.0));
        }
        let mut cells = res.cells.clone();
        for run in &mut cells[0].runs {
            run.incumbent_theta = vec![res.mle.theta_star; 5];
            run.incumbent_loglik = vec![res.mle.loglik_star; 5];
        }
        let curves = MSECurves::from_cells(&cells, &res.mle);
        assert!(curves.cells[0].mse_x.iter().all(|v| *v == 0.0));
        assert!(curves.cells[0].mse_f.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn initial_design_shared_across_cells_and_replicates_differ() {
        let res = run_experiment(&tiny()).unwrap();
        let n_init = res.cells[0].runs[0].trace.n_init;
        for r in 0..3 {
            let a = &res.cells[0].runs[r].trace.records[..n_init];
            let b = &res.cells[1].runs[r].trace.records[..n_init];
            let raw = |recs: &[crate::bo::BORecord]| recs.iter().map(|x| x.raw_value).collect::<Vec<_>>();
            assert_eq!(raw(a), raw(b));
        }
        let r0 = &res.cells[0].runs[0].trace.records;
        let r1 = &res.cells[0].runs[1].trace.records;
        assert!(r0.iter().zip(r1).any(|(a, b)| a.raw_value != b.raw_value));
    }

    #[test]
    fn experiment_is_deterministic() {
        assert_eq!(run_experiment(&tiny()).unwrap(), run_experiment(&tiny()).unwrap());
    }
}
