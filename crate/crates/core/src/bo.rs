//! GP-UCB maximization of a noisy scalar objective on a bounded interval.
//!
//! Parameters are mapped affinely onto `[0, 1]` before they reach the GP and
//! objective values are standardized with a [`Normalizer`]. Each iteration
//! maximizes `mu(x) + kappa_t s(x)` (grid scan plus Brent), evaluates the
//! objective at the winner, refits the GP and records the incumbent, the
//! arg-max of the posterior mean.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{self, GPDataset, GPHyperParams, GPPosterior};
use crate::objective::Objective;
use crate::rng::{derive_seed, Purpose};
use crate::univar_opt::{self, DEFAULT_BRENT_TOL, DEFAULT_GRID_POINTS};

/// Lower bound applied to the standardization scale.
pub const SCALE_FLOOR: f64 = 1e-8;

pub const DEFAULT_BOUNDS: (f64, f64) = (0.005, 0.025);
pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_EPS_X: f64 = 0.01;
pub const DEFAULT_EPS_F: f64 = 0.1;
pub const DEFAULT_PATIENCE: usize = 3;
pub const DEFAULT_NORMALIZER_REPS: usize = 10;

/// Affine standardization `(raw - mean) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: f64,
    pub scale: f64,
}

impl Normalizer {
    pub fn new(mean: f64, scale: f64) -> Result<Self> {
        if !mean.is_finite() || !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid(format!(
                "normalizer needs finite mean and scale > 0, got ({mean}, {scale})"
            )));
        }
        Ok(Self { mean, scale })
    }

    pub fn identity() -> Self {
        Self { mean: 0.0, scale: 1.0 }
    }

    pub fn transform(&self, raw: f64) -> f64 {
        (raw - self.mean) / self.scale
    }

    pub fn inverse(&self, standardized: f64) -> f64 {
        standardized * self.scale + self.mean
    }

    /// Grand mean of all samples and the largest per-group sample standard
    /// deviation (floored at [`SCALE_FLOOR`]). Every group needs two or more
    /// samples.
    pub fn from_groups<G: AsRef<[f64]>>(groups: &[G]) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::invalid("normalizer needs at least one probe point"));
        }
        let mut total = 0.0;
        let mut count = 0usize;
        let mut max_sd: f64 = 0.0;
        for g in groups {
            let g = g.as_ref();
            if g.len() < 2 {
                return Err(Error::invalid("normalizer needs >= 2 evaluations per probe point"));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("normalizer samples must be finite"));
            }
            let n = g.len() as f64;
            let mean = g.iter().sum::<f64>() / n;
            let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            max_sd = max_sd.max(var.sqrt());
            total += g.iter().sum::<f64>();
            count += g.len();
        }
        Self::new(total / count as f64, max_sd.max(SCALE_FLOOR))
    }
}

/// Evaluates `objective` `reps` times at each probe point and builds the
/// normalizer from the replicates.
pub fn build_normalizer<O: Objective + ?Sized>(
    objective: &O,
    probe_points: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Normalizer> {
    if probe_points.is_empty() {
        return Err(Error::invalid("normalizer needs at least one probe point"));
    }
    if reps < 2 {
        return Err(Error::invalid(format!("normalizer needs reps >= 2, got {reps}")));
    }
    let groups = probe_points
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            (0..reps)
                .map(|r| {
                    let s = derive_seed(seed, Purpose::Normalizer, &[i as u64, r as u64]);
                    objective
                        .evaluate(theta, s)
                        .map_err(|e| e.context(format!("normalizer probe theta={theta}, rep {r}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Normalizer::from_groups(&groups)
}

/// Exploration weight `sqrt(2 log(t^2 pi^2 / (6 delta)))`.
pub fn kappa(t: usize, delta: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("kappa schedule starts at t = 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let t = t as f64;
    Ok((2.0 * (t * t * PI * PI / (6.0 * delta)).ln()).sqrt())
}

/// `mu(x) + kappa_t s(x)` at a normalized input.
pub fn ucb_value(post: &GPPosterior, x: f64, kappa_t: f64) -> f64 {
    let (mean, var) = post.predict(x);
    mean + kappa_t * var.sqrt()
}

/// Source of the standardization constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Standardization {
    /// Replicate the objective at the initial design points.
    Probe { reps: usize },
    /// Use a pre-computed normalizer.
    Fixed { mean: f64, scale: f64 },
    /// Mean and sample standard deviation of one evaluation per initial
    /// design point. Meant for noise-free objectives, where replicate
    /// spread is zero.
    Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BOConfig {
    pub bounds: (f64, f64),
    pub hp: GPHyperParams,
    pub delta: f64,
    pub max_iters: usize,
    pub init_points: Vec<f64>,
    pub eps_x: f64,
    pub eps_f: f64,
    pub patience: usize,
    pub grid_points: usize,
    pub brent_tol: f64,
    pub seed: u64,
    pub standardization: Standardization,
    /// Stop at the first convergence instead of running the full budget.
    pub stop_on_convergence: bool,
    /// Replaces the kappa schedule by a constant when set.
    pub constant_kappa: Option<f64>,
}

/// Five equispaced points spanning `bounds`.
pub fn default_init_points(bounds: (f64, f64)) -> Vec<f64> {
    let (lo, hi) = bounds;
    (0..5)
        .map(|i| if i == 4 { hi } else { lo + (hi - lo) * i as f64 / 4.0 })
        .collect()
}

impl Default for BOConfig {
    fn default() -> Self {
        Self {
            bounds: DEFAULT_BOUNDS,
            hp: GPHyperParams::default(),
            delta: DEFAULT_DELTA,
            max_iters: 30,
            init_points: vec![0.005, 0.010, 0.015, 0.020, 0.025],
            eps_x: DEFAULT_EPS_X,
            eps_f: DEFAULT_EPS_F,
            patience: DEFAULT_PATIENCE,
            grid_points: DEFAULT_GRID_POINTS,
            brent_tol: DEFAULT_BRENT_TOL,
            seed: 0,
            standardization: Standardization::Probe {
                reps: DEFAULT_NORMALIZER_REPS,
            },
            stop_on_convergence: false,
            constant_kappa: None,
        }
    }
}

impl BOConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("bounds must satisfy lo < hi, got [{lo}, {hi}]")));
        }
        self.hp.validate()?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.init_points.is_empty() {
            return Err(Error::invalid("at least one initial design point is required"));
        }
        if let Some(p) = self.init_points.iter().find(|p| !(lo..=hi).contains(*p)) {
            return Err(Error::invalid(format!("initial point {p} outside [{lo}, {hi}]")));
        }
        if !(self.eps_x > 0.0 && self.eps_f > 0.0) {
            return Err(Error::invalid("convergence thresholds must be > 0"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be >= 1"));
        }
        if self.grid_points < 2 {
            return Err(Error::invalid("acquisition grid needs >= 2 points"));
        }
        if !(self.brent_tol > 0.0) {
            return Err(Error::invalid("Brent tolerance must be > 0"));
        }
        match self.standardization {
            Standardization::Probe { reps } if reps < 2 => return Err(Error::invalid("normalizer needs reps >= 2")),
            Standardization::Fixed { mean, scale } => {
                Normalizer::new(mean, scale)?;
            }
            Standardization::Spread if self.init_points.len() < 2 => {
                return Err(Error::invalid("spread standardization needs >= 2 initial points"))
            }
            _ => {}
        }
        if let Some(k) = self.constant_kappa {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::invalid(format!(
                    "constant kappa must be finite and >= 0, got {k}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_unit(&self, theta: f64) -> f64 {
        let (lo, hi) = self.bounds;
        ((theta - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    pub fn from_unit(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds;
        if x >= 1.0 {
            hi
        } else {
            lo + (hi - lo) * x
        }
    }

    fn kappa_at(&self, t: usize) -> Result<f64> {
        match self.constant_kappa {
            Some(k) => Ok(k),
            None => kappa(t, self.delta),
        }
    }
}

/// One evaluation of the objective and the incumbent after refitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BORecord {
    /// Acquisition iteration; 0 for initial design rows.
    pub t: usize,
    pub x_evaluated: f64,
    pub raw_value: f64,
    pub std_value: f64,
    /// Exploration weight used for the proposal; 0 for initial design rows.
    pub kappa: f64,
    pub incumbent_x: f64,
    pub incumbent_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BOTrace {
    pub bounds: (f64, f64),
    pub normalizer: Normalizer,
    /// Number of initial design rows at the head of `records`.
    pub n_init: usize,
    pub records: Vec<BORecord>,
    /// First acquisition iteration at which the convergence test passed.
    pub converged_at: Option<usize>,
}

impl BOTrace {
    fn unit(&self, theta: f64) -> f64 {
        (theta - self.bounds.0) / (self.bounds.1 - self.bounds.0)
    }

    /// Acquisition iterations completed.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(self.n_init)
    }

    /// Incumbents after the initial design (`i = 0`) and after each
    /// acquisition iteration (`i >= 1`).
    pub fn incumbents(&self) -> &[BORecord] {
        if self.n_init == 0 {
            &self.records
        } else {
            &self.records[self.n_init - 1..]
        }
    }

    /// GP training data available after `i` acquisition iterations.
    pub fn dataset_at(&self, i: usize) -> Result<GPDataset> {
        let n = (self.n_init + i).min(self.records.len());
        let recs = &self.records[..n];
        GPDataset::new(
            recs.iter().map(|r| self.unit(r.x_evaluated).clamp(0.0, 1.0)).collect(),
            recs.iter().map(|r| r.std_value).collect(),
        )
    }
}

/// True iff the last `patience` consecutive incumbent changes all satisfy
/// `|dx| < eps_x` (unit-interval coordinates) and `|dmu| < eps_f`
/// (standardized units).
pub fn check_convergence(trace: &BOTrace, eps_x: f64, eps_f: f64, patience: usize) -> bool {
    let inc = trace.incumbents();
    if patience == 0 || inc.len() < patience + 1 {
        return false;
    }
    inc[inc.len() - patience - 1..].windows(2).all(|w| {
        (trace.unit(w[1].incumbent_x) - trace.unit(w[0].incumbent_x)).abs() < eps_x
            && (w[1].incumbent_mean - w[0].incumbent_mean).abs() < eps_f
    })
}

/// Running state of one optimization.
#[derive(Debug, Clone)]
pub struct BOState {
    config: BOConfig,
    dataset: GPDataset,
    posterior: GPPosterior,
    trace: BOTrace,
    evaluations: u64,
}

impl BOState {
    pub fn new(config: BOConfig, normalizer: Normalizer) -> Result<Self> {
        config.validate()?;
        let dataset = GPDataset::default();
        let posterior = gp::fit(&dataset, &config.hp)?;
        let trace = BOTrace {
            bounds: config.bounds,
            normalizer,
            n_init: 0,
            records: Vec::new(),
            converged_at: None,
        };
        Ok(Self {
            config,
            dataset,
            posterior,
            trace,
            evaluations: 0,
        })
    }

    pub fn config(&self) -> &BOConfig {
        &self.config
    }

    pub fn posterior(&self) -> &GPPosterior {
        &self.posterior
    }

    pub fn trace(&self) -> &BOTrace {
        &self.trace
    }

    pub fn into_trace(self) -> BOTrace {
        self.trace
    }

    /// Acquisition iterations completed.
    pub fn iteration(&self) -> usize {
        self.trace.iterations()
    }

    fn incumbent(&self) -> Result<(f64, f64)> {
        let post = &self.posterior;
        let r = univar_opt::grid_then_brent(
            |x| post.mean(x),
            0.0,
            1.0,
            self.config.grid_points,
            self.config.brent_tol,
        )?;
        Ok((r.x_star, r.f_star))
    }

    /// Evaluates, records and refits at the unit-interval point `x`.
    fn observe<O: Objective + ?Sized>(&mut self, objective: &O, x: f64, t: usize, kappa_t: f64) -> Result<&BORecord> {
        let theta = self.config.from_unit(x);
        let seed = derive_seed(self.config.seed, Purpose::Evaluation, &[self.evaluations]);
        let raw = objective.evaluate(theta, seed)?;
        if !raw.is_finite() {
            return Err(Error::NonFinite { x: theta, value: raw });
        }
        self.evaluations += 1;
        let std_value = self.trace.normalizer.transform(raw);
        self.dataset.push(x, std_value)?;
        self.posterior = gp::fit(&self.dataset, &self.config.hp)?;
        let (inc_x, inc_mean) = self.incumbent()?;
        self.trace.records.push(BORecord {
            t,
            x_evaluated: theta,
            raw_value: raw,
            std_value,
            kappa: kappa_t,
            incumbent_x: self.config.from_unit(inc_x),
            incumbent_mean: inc_mean,
        });
        Ok(self.trace.records.last().expect("record just pushed"))
    }

    /// Evaluates the initial design. Must precede [`BOState::step`].
    pub fn initialize<O: Objective + ?Sized>(&mut self, objective: &O) -> Result<()> {
        if !self.trace.records.is_empty() {
            return Err(Error::invalid("initial design already evaluated"));
        }
        let points = self.config.init_points.clone();
        for (i, &theta) in points.iter().enumerate() {
            let x = self.config.to_unit(theta);
            self.observe(objective, x, 0, 0.0)
                .map_err(|e| e.context(format!("initial design point {i} (theta={theta})")))?;
            self.trace.n_init += 1;
        }
        Ok(())
    }

    /// One acquisition iteration: propose by UCB, evaluate, refit.
    pub fn step<O: Objective + ?Sized>(&mut self, objective: &O) -> Result<&BORecord> {
        if self.trace.n_init == 0 {
            return Err(Error::invalid("initialize the design before stepping"));
        }
        let t = self.iteration() + 1;
        let kappa_t = self.config.kappa_at(t)?;
        let post = &self.posterior;
        let proposal = univar_opt::grid_then_brent(
            |x| ucb_value(post, x, kappa_t),
            0.0,
            1.0,
            self.config.grid_points,
            self.config.brent_tol,
        )
        .map_err(|e| e.context(format!("acquisition search at iteration {t}")))?;
        let x_next = proposal.x_star.clamp(0.0, 1.0);
        self.observe(objective, x_next, t, kappa_t)
            .map_err(|e| e.context(format!("iteration {t}")))?;
        let (eps_x, eps_f, patience) = (self.config.eps_x, self.config.eps_f, self.config.patience);
        if self.trace.converged_at.is_none() && check_convergence(&self.trace, eps_x, eps_f, patience) {
            self.trace.converged_at = Some(t);
        }
        Ok(self.trace.records.last().expect("record just pushed"))
    }
}

/// Resolves the normalizer a run would use.
pub fn resolve_normalizer<O: Objective + ?Sized>(objective: &O, config: &BOConfig) -> Result<Normalizer> {
    match config.standardization {
        Standardization::Fixed { mean, scale } => Normalizer::new(mean, scale),
        Standardization::Probe { reps } => build_normalizer(objective, &config.init_points, reps, config.seed),
        Standardization::Spread => spread_normalizer(objective, &config.init_points, config.seed),
    }
}

/// Pooled mean and sample standard deviation of one evaluation per point,
/// floored at [`SCALE_FLOOR`].
pub fn spread_normalizer<O: Objective + ?Sized>(objective: &O, points: &[f64], seed: u64) -> Result<Normalizer> {
    if points.len() < 2 {
        return Err(Error::invalid("spread standardization needs >= 2 points"));
    }
    let values = points
        .iter()
        .enumerate()
        .map(|(i, &theta)| objective.evaluate(theta, derive_seed(seed, Purpose::Normalizer, &[i as u64])))
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Normalizer::new(mean, var.sqrt().max(SCALE_FLOOR))
}

/// Full optimization: standardization, initial design, then acquisition
/// iterations until `max_iters` (or the first convergence when
/// `stop_on_convergence` is set).
pub fn bo_run<O: Objective + ?Sized>(objective: &O, config: &BOConfig) -> Result<BOTrace> {
    config.validate()?;
    let normalizer = resolve_normalizer(objective, config)?;
    let mut state = BOState::new(config.clone(), normalizer)?;
    state.initialize(objective)?;
    for _ in 0..config.max_iters {
        state.step(objective)?;
        if config.stop_on_convergence && state.trace.converged_at.is_some() {
            break;
        }
    }
    Ok(state.into_trace())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_examples() {
        // reference values evaluated independently in extended precision
        assert!((kappa(1, 0.1).unwrap() - 2.366_552_511_762_539).abs() < 1e-12);
        assert!((kappa(10, 0.1).unwrap() - 3.848_494_661_930_268).abs() < 1e-12);
        assert!(kappa(0, 0.1).is_err());
        assert!(kappa(1, 0.0).is_err());
        assert!(kappa(1, 1.0).is_err());
    }

    #[test]
    fn kappa_monotone_in_t_and_delta() {
        for delta in [0.01, 0.1, 0.5] {
            for t in 1..1000 {
                assert!(kappa(t + 1, delta).unwrap() > kappa(t, delta).unwrap());
            }
        }
        for t in [1, 10, 100, 1000] {
            assert!(kappa(t, 0.01).unwrap() > kappa(t, 0.1).unwrap());
            assert!(kappa(t, 0.1).unwrap() > kappa(t, 0.5).unwrap());
        }
    }

    #[test]
    fn normalizer_round_trip() {
        let n = Normalizer::new(-750.3, 1.7).unwrap();
        for v in [-760.0, -750.3, 0.0, 12.5] {
            assert!((n.inverse(n.transform(v)) - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
        assert!(Normalizer::new(0.0, 0.0).is_err());
    }

    #[test]
    fn deterministic_objective_hits_scale_floor() {
        let f = |theta: f64, _: u64| Ok(-(theta - 0.01).powi(2));
        let pts = [0.005, 0.01, 0.02];
        let n = build_normalizer(&f, &pts, 2, 0).unwrap();
        assert_eq!(n.scale, SCALE_FLOOR);
        let grand = pts.iter().map(|t| -(t - 0.01f64).powi(2)).sum::<f64>() / 3.0;
        assert!((n.mean - grand).abs() < 1e-15);
    }

    #[test]
    fn spread_normalizer_uses_between_point_spread() {
        let f = |theta: f64, _: u64| Ok(theta * 10.0);
        let n = spread_normalizer(&f, &[0.0, 1.0, 2.0], 0).unwrap();
        assert_eq!(n.mean, 10.0);
        assert!((n.scale - 10.0).abs() < 1e-12);
        assert!(spread_normalizer(&f, &[0.0], 0).is_err());
    }

    #[test]
    fn normalizer_is_translation_equivariant() {
        let groups = vec![vec![1.0, 2.0, 4.0], vec![-1.0, 0.5]];
        let shifted: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|v| v + 100.0).collect()).collect();
        let a = Normalizer::from_groups(&groups).unwrap();
        let b = Normalizer::from_groups(&shifted).unwrap();
        assert!((b.mean - a.mean - 100.0).abs() < 1e-12);
        assert!((b.scale - a.scale).abs() < 1e-12);
    }

    #[test]
    fn normalizer_input_errors() {
        let f = |_: f64, _: u64| Ok(0.0);
        assert!(build_normalizer(&f, &[], 3, 0).is_err());
        assert!(build_normalizer(&f, &[0.1], 1, 0).is_err());
    }

    fn trace_from(xs: &[f64], means: &[f64]) -> BOTrace {
        BOTrace {
            bounds: (0.0, 1.0),
            normalizer: Normalizer::identity(),
            n_init: 1,
            records: xs
                .iter()
                .zip(means)
                .enumerate()
                .map(|(t, (&x, &m))| BORecord {
                    t,
                    x_evaluated: x,
                    raw_value: 0.0,
                    std_value: 0.0,
                    kappa: 0.0,
                    incumbent_x: x,
                    incumbent_mean: m,
                })
                .collect(),
            converged_at: None,
        }
    }

    #[test]
    fn convergence_examples() {
        let flat = trace_from(&[0.3; 5], &[1.0; 5]);
        assert!(check_convergence(&flat, 0.01, 0.1, 3));

        let alternating = trace_from(&[0.30, 0.32, 0.30, 0.32, 0.30], &[1.0; 5]);
        assert!(!check_convergence(&alternating, 0.01, 0.1, 3));

        let settling = trace_from(&[0.500, 0.505, 0.509, 0.509], &[-1.0, -0.95, -0.94, -0.94]);
        assert!(check_convergence(&settling, 0.01, 0.1, 3));

        // too short for the requested patience
        assert!(!check_convergence(&trace_from(&[0.3; 3], &[1.0; 3]), 0.01, 0.1, 3));
    }

    #[test]
    fn config_validation() {
        let ok = BOConfig::default();
        ok.validate().unwrap();
        assert!(BOConfig {
            bounds: (0.02, 0.01),
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(BOConfig {
            delta: 1.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(BOConfig {
            init_points: vec![0.1],
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(BOConfig {
            init_points: vec![],
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(BOConfig { patience: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn unit_mapping_hits_bounds() {
        let c = BOConfig::default();
        assert_eq!(c.from_unit(0.0), 0.005);
        assert_eq!(c.from_unit(1.0), 0.025);
        assert_eq!(c.to_unit(0.025), 1.0);
        assert_eq!(default_init_points(c.bounds), vec![0.005, 0.01, 0.015, 0.02, 0.025]);
    }
}
