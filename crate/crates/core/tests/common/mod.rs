//! Dense reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pfbo::gp::{se_kernel, GPHyperParams};
use pfbo::ssm::{LinearGaussianModel, TimeSeries};

/// GP posterior mean and latent variance by explicit inversion of
/// `K + sigma_n^2 I`.
pub struct DenseGp {
    hp: GPHyperParams,
    xs: Vec<f64>,
    k_inv: DMatrix<f64>,
    alpha: DVector<f64>,
}

impl DenseGp {
    pub fn new(xs: &[f64], ys: &[f64], hp: &GPHyperParams) -> Self {
        let n = xs.len();
        let noise = hp.sigma_n * hp.sigma_n;
        let k = DMatrix::from_fn(n, n, |i, j| {
            se_kernel(xs[i], xs[j], hp) + if i == j { noise } else { 0.0 }
        });
        let k_inv = k.try_inverse().expect("covariance is invertible");
        let alpha = &k_inv * DVector::from_column_slice(ys);
        Self {
            hp: *hp,
            xs: xs.to_vec(),
            k_inv,
            alpha,
        }
    }

    pub fn predict(&self, x: f64) -> (f64, f64) {
        let kx = DVector::from_iterator(self.xs.len(), self.xs.iter().map(|&xi| se_kernel(xi, x, &self.hp)));
        let mean = kx.dot(&self.alpha);
        let var = se_kernel(x, x, &self.hp) - kx.dot(&(&self.k_inv * &kx));
        (mean, var)
    }
}

/// Exact log-likelihood of the random-walk model from the joint Gaussian law
/// of `y_1..y_T`: mean `init_mean`, covariance
/// `init_var + min(s, t) theta + [s == t] obs_var`.
pub fn dense_kalman_loglik(theta: f64, series: &TimeSeries, model: &LinearGaussianModel) -> f64 {
    let y = series.values();
    let n = y.len();
    let cov = DMatrix::from_fn(n, n, |s, t| {
        let shared = model.init_var() + (s.min(t) + 1) as f64 * theta;
        if s == t {
            shared + model.obs_var()
        } else {
            shared
        }
    });
    let chol = cov.cholesky().expect("covariance is positive definite");
    let resid = DVector::from_iterator(n, y.iter().map(|v| v - model.init_mean()));
    let z = chol.l().solve_lower_triangular(&resid).expect("non-singular factor");
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + z.dot(&z))
}

/// Unbiased sample mean and variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
