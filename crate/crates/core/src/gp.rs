//! Gaussian-process surrogate on the unit interval.
//!
//! Zero prior mean, squared-exponential covariance and i.i.d. Gaussian
//! observation noise. [`fit`] factorizes `K + (sigma_n^2 + jitter) I` once;
//! [`GPPosterior::predict`] then costs `O(t)` for the mean and `O(t^2)` for
//! the variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Starting diagonal jitter, relative to `sigma_f^2`.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GPHyperParams {
    pub sigma_f: f64,
    pub length_scale: f64,
    pub sigma_n: f64,
}

impl Default for GPHyperParams {
    fn default() -> Self {
        Self {
            sigma_f: 1.0,
            length_scale: 0.2,
            sigma_n: 0.3,
        }
    }
}

impl GPHyperParams {
    pub fn new(sigma_f: f64, length_scale: f64, sigma_n: f64) -> Result<Self> {
        let hp = Self {
            sigma_f,
            length_scale,
            sigma_n,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_f.is_finite()
            && self.sigma_f > 0.0
            && self.length_scale.is_finite()
            && self.length_scale > 0.0
            && self.sigma_n.is_finite()
            && self.sigma_n >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "GP hyperparameters need sigma_f > 0, length_scale > 0, sigma_n >= 0; got {self:?}"
            )))
        }
    }
}

/// `sigma_f^2 exp(-(x - x')^2 / (2 l^2))`.
#[inline]
pub fn se_kernel(x: f64, x_prime: f64, hp: &GPHyperParams) -> f64 {
    let d = (x - x_prime) / hp.length_scale;
    hp.sigma_f * hp.sigma_f * (-0.5 * d * d).exp()
}

/// Training pairs: inputs on `[0, 1]`, standardized targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GPDataset {
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl GPDataset {
    pub fn new(inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::invalid(format!(
                "dataset has {} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let mut ds = Self::default();
        for (x, y) in inputs.into_iter().zip(targets) {
            ds.push(x, y)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, x: f64, y: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid(format!("GP input {x} outside [0, 1]")));
        }
        if !y.is_finite() {
            return Err(Error::invalid(format!("GP target {y} is not finite")));
        }
        self.inputs.push(x);
        self.targets.push(y);
        Ok(())
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Fitted posterior. Immutable; safe to query from several threads.
#[derive(Debug, Clone)]
pub struct GPPosterior {
    hp: GPHyperParams,
    inputs: Vec<f64>,
    /// Lower Cholesky factor, row-major `t x t`.
    chol: Vec<f64>,
    /// `(K + sigma_n^2 I)^{-1} y`
    alpha: Vec<f64>,
    jitter: f64,
}

/// In-place lower Cholesky of a row-major symmetric matrix. Returns false on
/// a non-positive pivot.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in (j + 1)..n {
            a[j * n + k] = 0.0;
        }
    }
    true
}

fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn backward_solve_transposed(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Conditions the GP prior on `dataset`. An empty dataset yields the prior.
pub fn fit(dataset: &GPDataset, hp: &GPHyperParams) -> Result<GPPosterior> {
    hp.validate()?;
    let n = dataset.len();
    let xs = dataset.inputs();
    let mut base = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = se_kernel(xs[i], xs[j], hp);
            base[i * n + j] = k;
            base[j * n + i] = k;
        }
    }
    let signal = hp.sigma_f * hp.sigma_f;
    let noise = hp.sigma_n * hp.sigma_n;
    let mut jitter = JITTER_START * signal;
    loop {
        let mut chol = base.clone();
        for i in 0..n {
            chol[i * n + i] += noise + jitter;
        }
        if cholesky(&mut chol, n) {
            let mut alpha = dataset.targets().to_vec();
            forward_solve(&chol, n, &mut alpha);
            backward_solve_transposed(&chol, n, &mut alpha);
            return Ok(GPPosterior {
                hp: *hp,
                inputs: xs.to_vec(),
                chol,
                alpha,
                jitter,
            });
        }
        jitter *= 10.0;
        if jitter > JITTER_MAX * signal * (1.0 + 1e-9) {
            return Err(Error::Factorization { size: n });
        }
    }
}

impl GPPosterior {
    pub fn hyperparams(&self) -> &GPHyperParams {
        &self.hp
    }

    /// Diagonal jitter that made the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn kernel_vector(&self, x: f64) -> Vec<f64> {
        self.inputs.iter().map(|&xi| se_kernel(xi, x, &self.hp)).collect()
    }

    /// Posterior mean `k(x)^T alpha`.
    pub fn mean(&self, x: f64) -> f64 {
        self.inputs
            .iter()
            .zip(&self.alpha)
            .map(|(&xi, a)| se_kernel(xi, x, &self.hp) * a)
            .sum()
    }

    /// Posterior mean and variance at `x`; the variance is clamped at zero.
    pub fn predict(&self, x: f64) -> (f64, f64) {
        let n = self.inputs.len();
        let mut v = self.kernel_vector(x);
        let mean = v.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        forward_solve(&self.chol, n, &mut v);
        let reduction: f64 = v.iter().map(|z| z * z).sum();
        let var = se_kernel(x, x, &self.hp) - reduction;
        (mean, var.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(sigma_f: f64, l: f64, sigma_n: f64) -> GPHyperParams {
        GPHyperParams::new(sigma_f, l, sigma_n).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let h = hp(1.7, 0.3, 0.1);
        assert_eq!(se_kernel(0.4, 0.4, &h), 1.7 * 1.7);
        let r = se_kernel(0.1, 0.4, &h) / (1.7 * 1.7);
        assert!((r - 0.606_530_659_712_633_4).abs() < 1e-12);
        assert_eq!(se_kernel(0.12, 0.9, &h), se_kernel(0.9, 0.12, &h));
    }

    #[test]
    fn empty_dataset_is_prior() {
        let post = fit(&GPDataset::default(), &hp(1.5, 0.2, 0.3)).unwrap();
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(post.predict(x), (0.0, 2.25));
        }
    }

    #[test]
    fn noise_free_single_point_interpolates() {
        let ds = GPDataset::new(vec![0.4], vec![1.3]).unwrap();
        let post = fit(&ds, &hp(1.0, 0.2, 0.0)).unwrap();
        let (m, v) = post.predict(0.4);
        assert!((m - 1.3).abs() < 1e-9);
        assert!(v < 1e-9);
    }

    #[test]
    fn far_queries_revert_to_prior() {
        let ds = GPDataset::new(vec![0.0, 0.02], vec![2.0, 1.5]).unwrap();
        let post = fit(&ds, &hp(1.0, 0.05, 0.3)).unwrap();
        let (m, v) = post.predict(1.0);
        assert!(m.abs() < 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_training_point_is_shrunk() {
        let ds = GPDataset::new(vec![0.3, 0.7], vec![2.0, -1.0]).unwrap();
        let post = fit(&ds, &hp(1.0, 0.2, 0.5)).unwrap();
        let (m, v) = post.predict(0.3);
        assert!((m - 2.0).abs() < 2.0);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn duplicated_noise_free_inputs_need_jitter() {
        let ds = GPDataset::new(vec![0.5, 0.5, 0.5], vec![1.0, 1.0, 1.0]).unwrap();
        let post = fit(&ds, &hp(1.0, 0.2, 0.0)).unwrap();
        assert!(post.jitter() >= JITTER_START);
        assert!((post.mean(0.5) - 1.0).abs() < 1e-5);
        assert!(post.predict(0.5).1 < 1e-6);
    }

    #[test]
    fn dataset_validation() {
        assert!(GPDataset::new(vec![0.1], vec![]).is_err());
        assert!(GPDataset::new(vec![1.1], vec![0.0]).is_err());
        assert!(GPDataset::new(vec![0.1], vec![f64::NAN]).is_err());
        assert!(GPHyperParams::new(0.0, 0.1, 0.1).is_err());
        assert!(GPHyperParams::new(1.0, -0.1, 0.1).is_err());
    }
}
