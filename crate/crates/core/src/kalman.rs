//! Exact log-likelihood of the random-walk-plus-noise model.
//!
//! The Kalman recursion gives the one-step predictive densities
//! `p(y_t | y_{1:t-1})` in closed form, so the log-likelihood carries no
//! Monte Carlo noise. Its maximizer over a bounded interval serves as the
//! reference answer for every noisy optimizer in the crate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ssm::{LinearGaussianModel, TimeSeries};
use crate::univar_opt;

/// Filtered state moments after an update step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub mean: f64,
    pub var: f64,
}

/// Maximum of the exact log-likelihood over a bounded interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MLEResult {
    pub theta_star: f64,
    pub loglik_star: f64,
}

/// Grid resolution of the MLE search before Brent refinement.
pub const MLE_GRID_POINTS: usize = 401;

/// Runs the filter, handing every predictive `(mean, variance)` and the
/// updated state to `visit`. Returns the summed log predictive density.
fn run_filter(
    theta: f64,
    series: &TimeSeries,
    model: &LinearGaussianModel,
    mut visit: impl FnMut(f64, f64, KalmanState),
) -> Result<f64> {
    if !theta.is_finite() || theta < 0.0 {
        return Err(Error::invalid(format!("theta must be finite and >= 0, got {theta}")));
    }
    let obs_var = model.obs_var();
    let mut state = KalmanState {
        mean: model.init_mean(),
        var: model.init_var(),
    };
    let mut loglik = 0.0;
    for (t, &y) in series.values().iter().enumerate() {
        if !y.is_finite() {
            return Err(Error::invalid(format!("non-finite observation at step {}", t + 1)));
        }
        // predict
        let pred_mean = state.mean;
        let pred_var = state.var + theta;
        // predictive density of y_t
        let s = pred_var + obs_var;
        let innov = y - pred_mean;
        loglik += -0.5 * ((2.0 * PI * s).ln() + innov * innov / s);
        // update
        let gain = pred_var / s;
        state = KalmanState {
            mean: pred_mean + gain * innov,
            var: (pred_var * obs_var / s).max(0.0),
        };
        visit(pred_mean, s, state);
    }
    Ok(loglik)
}

/// Exact log-likelihood `sum_t log N(y_t; m_t, s_t)` with `tau2 = theta`.
/// `model_base` supplies the observation variance and the initial-state prior.
pub fn kalman_loglik(theta: f64, series: &TimeSeries, model_base: &LinearGaussianModel) -> Result<f64> {
    run_filter(theta, series, model_base, |_, _, _| {})
}

/// Per-step log predictive densities and filtered states.
pub fn kalman_filter(
    theta: f64,
    series: &TimeSeries,
    model_base: &LinearGaussianModel,
) -> Result<(Vec<f64>, Vec<KalmanState>)> {
    let mut steps = Vec::with_capacity(series.len());
    let mut states = Vec::with_capacity(series.len());
    let ys = series.values();
    let mut t = 0;
    run_filter(theta, series, model_base, |m, s, st| {
        let innov = ys[t] - m;
        steps.push(-0.5 * ((2.0 * PI * s).ln() + innov * innov / s));
        states.push(st);
        t += 1;
    })?;
    Ok((steps, states))
}

/// Maximizes [`kalman_loglik`] over the closed interval `[lo, hi]` by a grid
/// scan followed by Brent refinement to x-tolerance `tol`. An endpoint is
/// returned when the maximum sits on the boundary.
pub fn kalman_mle(
    series: &TimeSeries,
    bounds: (f64, f64),
    model_base: &LinearGaussianModel,
    tol: f64,
) -> Result<MLEResult> {
    let (lo, hi) = bounds;
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
        return Err(Error::invalid(format!(
            "MLE bounds must satisfy 0 <= lo < hi, got [{lo}, {hi}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be > 0, got {tol}")));
    }
    let objective = |theta: f64| kalman_loglik(theta, series, model_base).unwrap_or(f64::NAN);
    // validate inputs once so that the closure cannot fail silently
    kalman_loglik(lo, series, model_base)?;
    let opt = univar_opt::grid_then_brent(objective, lo, hi, MLE_GRID_POINTS, tol)?;
    Ok(MLEResult {
        theta_star: opt.x_star,
        loglik_star: opt.f_star,
    })
}
