//! Concrete Bayesian posteriors and synthetic data generators.
//!
//! Gradients follow the drift convention used throughout the crate:
//! the samplers consume `f(theta) = 1/2 * grad log pi(theta)`, assembled
//! from the prior gradient and per-datum likelihood gradients exposed here
//! (see [`crate::gradients`] for the minibatch estimator).

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rand::SeedableRng;

use crate::error::{Error, Result};

/// A Bayesian posterior with a factorized likelihood over `data_len` items.
pub trait Model: Sync {
    fn dim(&self) -> usize;

    /// Number of data items N.
    fn data_len(&self) -> usize;

    /// Writes `grad log pi_0(theta)` into `out`.
    fn prior_grad(&self, theta: &[f64], out: &mut [f64]);

    /// Adds `grad log pi(X_i | theta)` into `out` (accumulating).
    fn add_datum_grad(&self, i: usize, theta: &[f64], out: &mut [f64]);

    /// Unnormalized log posterior density, for Metropolis-Hastings.
    fn log_density(&self, theta: &[f64]) -> f64;

    /// Exact drift `f(theta) = 1/2 grad log pi(theta)` over the full data set.
    fn drift(&self, theta: &[f64], out: &mut [f64]) {
        self.prior_grad(theta, out);
        for i in 0..self.data_len() {
            self.add_datum_grad(i, theta, out);
        }
        for v in out.iter_mut() {
            *v *= 0.5;
        }
    }
}

/// One-dimensional conjugate Gaussian model:
/// `theta ~ N(0, sigma_theta_sq)`, `X_i | theta ~ N(theta, sigma_x_sq)`.
#[derive(Debug, Clone)]
pub struct GaussianConjugateModel {
    pub sigma_theta_sq: f64,
    pub sigma_x_sq: f64,
    data: Vec<f64>,
    // cached at construction so the exact drift is O(1) per step
    mu_p: f64,
    a_coef: f64,
}

impl GaussianConjugateModel {
    pub fn new(sigma_theta_sq: f64, sigma_x_sq: f64, data: Vec<f64>) -> Result<Self> {
        if !(sigma_theta_sq > 0.0) || !(sigma_x_sq > 0.0) {
            return Err(Error::InvalidArgument(
                "prior and likelihood variances must be positive".into(),
            ));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite data point".into()));
        }
        let n = data.len() as f64;
        let sum: f64 = data.iter().sum();
        let mu_p = sum / (sigma_x_sq / sigma_theta_sq + n);
        let a_coef = 0.5 * (1.0 / sigma_theta_sq + n / sigma_x_sq);
        Ok(GaussianConjugateModel {
            sigma_theta_sq,
            sigma_x_sq,
            data,
            mu_p,
            a_coef,
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Posterior `(mu_p, sigma_p_sq, A)` with `A = 1/(2 sigma_p_sq)`.
    pub fn posterior_params(&self) -> (f64, f64, f64) {
        (self.mu_p, 0.5 / self.a_coef, self.a_coef)
    }

    /// Largest stable step size `1/A` for the Euler/SGLD recursions.
    pub fn stability_limit(&self) -> f64 {
        let (_, _, a) = self.posterior_params();
        1.0 / a
    }

    /// Unbiased empirical variance of the data (divisor N-1).
    pub fn data_variance(&self) -> Result<f64> {
        let n = self.data.len();
        if n < 2 {
            return Err(Error::DegenerateData(format!(
                "empirical variance needs N >= 2, got N={n}"
            )));
        }
        let mean = self.data.iter().sum::<f64>() / n as f64;
        let ss: f64 = self.data.iter().map(|x| (x - mean).powi(2)).sum();
        Ok(ss / (n as f64 - 1.0))
    }
}

impl Model for GaussianConjugateModel {
    fn dim(&self) -> usize {
        1
    }

    fn data_len(&self) -> usize {
        self.data.len()
    }

    fn prior_grad(&self, theta: &[f64], out: &mut [f64]) {
        out[0] = -theta[0] / self.sigma_theta_sq;
    }

    fn add_datum_grad(&self, i: usize, theta: &[f64], out: &mut [f64]) {
        out[0] += (self.data[i] - theta[0]) / self.sigma_x_sq;
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let t = theta[0];
        let mut lp = -t * t / (2.0 * self.sigma_theta_sq);
        for &x in &self.data {
            lp -= (x - t) * (x - t) / (2.0 * self.sigma_x_sq);
        }
        lp
    }

    /// The Gaussian posterior drift collapses to `A (mu_p - theta)`, so the
    /// full-data drift costs O(1) instead of O(N).
    fn drift(&self, theta: &[f64], out: &mut [f64]) {
        out[0] = self.a_coef * (self.mu_p - theta[0]);
    }
}

/// Numerically stable `log sigma(z) = -log(1 + exp(-z))`.
fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// `sigma(z) = 1/(1+exp(-z))` without overflow for large |z|.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Bayesian logistic regression with labels in {-1, +1} and a Gaussian
/// `N(0, C0)` prior on the coefficients; `prior_precision = C0^{-1}`.
#[derive(Debug, Clone)]
pub struct LogisticRegressionModel {
    pub covariates: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub prior_precision: Vec<Vec<f64>>,
    dim: usize,
}

impl LogisticRegressionModel {
    pub fn new(covariates: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let n = covariates.len();
        if n == 0 || n != labels.len() {
            return Err(Error::InvalidArgument(
                "covariates and labels must be nonempty and of equal length".into(),
            ));
        }
        let dim = covariates[0].len();
        if covariates.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidArgument("ragged covariate rows".into()));
        }
        if covariates.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite covariate".into()));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidArgument("labels must be +1 or -1".into()));
        }
        let prior_precision = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Ok(LogisticRegressionModel {
            covariates,
            labels,
            prior_precision,
            dim,
        })
    }
}

impl Model for LogisticRegressionModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn data_len(&self) -> usize {
        self.covariates.len()
    }

    fn prior_grad(&self, theta: &[f64], out: &mut [f64]) {
        for (r, row) in self.prior_precision.iter().enumerate() {
            out[r] = -row.iter().zip(theta).map(|(p, t)| p * t).sum::<f64>();
        }
    }

    fn add_datum_grad(&self, i: usize, theta: &[f64], out: &mut [f64]) {
        let x = &self.covariates[i];
        let y = self.labels[i];
        let z: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        // d/d beta log sigma(y beta.x) = y x sigma(-y beta.x)
        let w = y * sigmoid(-y * z);
        for (o, xi) in out.iter_mut().zip(x) {
            *o += w * xi;
        }
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let mut quad = 0.0;
        for (r, row) in self.prior_precision.iter().enumerate() {
            quad += theta[r] * row.iter().zip(theta).map(|(p, t)| p * t).sum::<f64>();
        }
        let mut lp = -0.5 * quad;
        for (x, &y) in self.covariates.iter().zip(&self.labels) {
            let z: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
            lp += log_sigmoid(y * z);
        }
        lp
    }
}

/// Plain Ornstein-Uhlenbeck target `N(mu, sigma_sq)` treated as a model with
/// one pseudo-datum, so the chain runner applies unchanged. Exact drift is
/// `-(theta - mu) / (2 sigma_sq)`.
#[derive(Debug, Clone)]
pub struct OuProcess {
    pub mu: f64,
    pub sigma_sq: f64,
}

impl OuProcess {
    pub fn new(mu: f64, sigma_sq: f64) -> Result<Self> {
        if !(sigma_sq > 0.0) {
            return Err(Error::InvalidArgument("sigma_sq must be positive".into()));
        }
        Ok(OuProcess { mu, sigma_sq })
    }
}

impl Model for OuProcess {
    fn dim(&self) -> usize {
        1
    }

    fn data_len(&self) -> usize {
        1
    }

    fn prior_grad(&self, _theta: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }

    fn add_datum_grad(&self, _i: usize, theta: &[f64], out: &mut [f64]) {
        out[0] += -(theta[0] - self.mu) / self.sigma_sq;
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let d = theta[0] - self.mu;
        -d * d / (2.0 * self.sigma_sq)
    }
}

/// Draws `N` i.i.d. `Normal(theta_truth, sigma_x_sq)` observations.
pub fn generate_toy_data(theta_truth: f64, sigma_x_sq: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(sigma_x_sq > 0.0) {
        return Err(Error::InvalidArgument("sigma_x_sq must be positive".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need N >= 1 data points".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sd = sigma_x_sq.sqrt();
    Ok((0..n)
        .map(|_| theta_truth + sd * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// Synthetic logistic regression data set: standard normal covariates with a
/// final all-ones intercept column, labels drawn from the model under
/// `beta_true`.
pub fn generate_logistic_data(
    n: usize,
    dim: usize,
    beta_true: &[f64],
    seed: u64,
) -> Result<LogisticRegressionModel> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidArgument("need N >= 1 and d >= 1".into()));
    }
    if beta_true.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "beta_true has length {}, expected {dim}",
            beta_true.len()
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut covariates = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row: Vec<f64> = (0..dim - 1)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        row.push(1.0);
        let z: f64 = row.iter().zip(beta_true).map(|(a, b)| a * b).sum();
        let p_plus = sigmoid(z);
        let y = if rng.gen::<f64>() < p_plus { 1.0 } else { -1.0 };
        covariates.push(row);
        labels.push(y);
    }
    LogisticRegressionModel::new(covariates, labels)
}

/// Writes a scalar data set as CSV, one row per datum.
pub fn save_toy_data_csv<P: AsRef<Path>>(path: P, data: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x"])?;
    for x in data {
        w.write_record([format!("{x:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_toy_data_csv<P: AsRef<Path>>(path: P) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let x: f64 = rec
            .get(0)
            .ok_or_else(|| Error::InvalidArgument("empty CSV row".into()))?
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("bad CSV value: {e}")))?;
        out.push(x);
    }
    Ok(out)
}

/// Logistic data set round-trip: columns `y, x_0, .., x_{d-1}`.
pub fn save_logistic_data_csv<P: AsRef<Path>>(
    path: P,
    model: &LogisticRegressionModel,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["y".to_string()];
    header.extend((0..model.dim()).map(|j| format!("x_{j}")));
    w.write_record(&header)?;
    for (row, &y) in model.covariates.iter().zip(&model.labels) {
        let mut rec = vec![format!("{y}")];
        rec.extend(row.iter().map(|x| format!("{x:.17e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_logistic_data_csv<P: AsRef<Path>>(path: P) -> Result<LogisticRegressionModel> {
    let mut r = csv::Reader::from_path(path)?;
    let mut covariates = Vec::new();
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut it = rec.iter();
        let y: f64 = it
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty CSV row".into()))?
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("bad CSV value: {e}")))?;
        let row: std::result::Result<Vec<f64>, _> = it.map(str::parse).collect();
        covariates.push(row.map_err(|e| Error::InvalidArgument(format!("bad CSV value: {e}")))?);
        labels.push(y);
    }
    LogisticRegressionModel::new(covariates, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn finite_difference_grad(model: &dyn Model, theta: &[f64]) -> Vec<f64> {
        let eps = 1e-6;
        (0..theta.len())
            .map(|j| {
                let mut tp = theta.to_vec();
                let mut tm = theta.to_vec();
                tp[j] += eps;
                tm[j] -= eps;
                (model.log_density(&tp) - model.log_density(&tm)) / (2.0 * eps)
            })
            .collect()
    }

    fn full_grad(model: &dyn Model, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        model.prior_grad(theta, &mut g);
        for i in 0..model.data_len() {
            model.add_datum_grad(i, theta, &mut g);
        }
        g
    }

    #[test]
    fn toy_posterior_params_fixture() {
        let m = GaussianConjugateModel::new(1.0, 1.0, vec![1.0, -1.0]).unwrap();
        let (mu, s2, a) = m.posterior_params();
        assert_abs_diff_eq!(mu, 0.0);
        assert_relative_eq!(s2, 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(a, 1.5, max_relative = 1e-14);

        let m = GaussianConjugateModel::new(1.0, 1.0, vec![1.0, 3.0]).unwrap();
        let (mu, s2, a) = m.posterior_params();
        assert_relative_eq!(mu, 4.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(s2, 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(a, 1.5, max_relative = 1e-14);
        // A * sigma_p^2 = 1/2 exactly
        assert_relative_eq!(a * s2, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn toy_posterior_empty_data_recovers_prior() {
        let m = GaussianConjugateModel::new(2.5, 1.0, vec![]).unwrap();
        let (mu, s2, a) = m.posterior_params();
        assert_eq!(mu, 0.0);
        assert_relative_eq!(s2, 2.5, max_relative = 1e-14);
        assert_relative_eq!(a, 1.0 / 5.0, max_relative = 1e-14);
    }

    #[test]
    fn toy_gradient_is_posterior_score() {
        let m = GaussianConjugateModel::new(1.0, 0.7, vec![0.3, -1.2, 2.0]).unwrap();
        let (mu_p, s2, _) = m.posterior_params();
        for theta in [-2.0, 0.0, mu_p, 1.7] {
            let g = full_grad(&m, &[theta]);
            assert_relative_eq!(g[0], -(theta - mu_p) / s2, max_relative = 1e-12);
        }
        // stationary at the mode
        let g = full_grad(&m, &[mu_p]);
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn logistic_gradients_at_zero_and_fixture() {
        let m = LogisticRegressionModel::new(vec![vec![2.0]], vec![-1.0]).unwrap();
        // beta = 0: prior grad 0, per-datum y x / 2
        let mut g = vec![0.0];
        m.prior_grad(&[0.0], &mut g);
        assert_eq!(g[0], 0.0);
        g[0] = 0.0;
        m.add_datum_grad(0, &[0.0], &mut g);
        assert_relative_eq!(g[0], -1.0 * 2.0 * 0.5, max_relative = 1e-14);

        // beta = 1, x = 2, y = -1: per-datum gradient -2 sigma(2)
        g[0] = 0.0;
        m.add_datum_grad(0, &[1.0], &mut g);
        assert_relative_eq!(g[0], -2.0 / (1.0 + (-2.0f64).exp()), max_relative = 1e-12);
        assert_relative_eq!(g[0], -1.76159415595576, max_relative = 1e-10);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let toy = GaussianConjugateModel::new(1.3, 0.8, vec![0.5, -0.1, 1.9, -2.2]).unwrap();
        let logistic = generate_logistic_data(40, 3, &[1.0, -1.0, 0.5], 5).unwrap();
        let ou = OuProcess::new(0.7, 2.0).unwrap();
        let models: [&dyn Model; 3] = [&toy, &logistic, &ou];
        for model in models {
            for _ in 0..100 {
                let theta: Vec<f64> = (0..model.dim())
                    .map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let g = full_grad(model, &theta);
                let fd = finite_difference_grad(model, &theta);
                for (a, b) in g.iter().zip(&fd) {
                    assert_relative_eq!(a, b, max_relative = 1e-5, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn generate_toy_data_is_deterministic_and_centred() {
        let a = generate_toy_data(1.0, 1.0, 10_000, 99).unwrap();
        let b = generate_toy_data(1.0, 1.0, 10_000, 99).unwrap();
        assert_eq!(a, b);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!((mean - 1.0).abs() < 0.04, "sample mean {mean}");
        assert!(generate_toy_data(1.0, 0.0, 10, 1).is_err());
    }

    #[test]
    fn generate_logistic_data_shape_and_balance() {
        let m = generate_logistic_data(1000, 3, &[1.0, -1.0, 0.5], 3).unwrap();
        assert_eq!(m.dim(), 3);
        assert!(m.covariates.iter().all(|r| r[2] == 1.0));

        let balanced = generate_logistic_data(10_000, 3, &[0.0, 0.0, 0.0], 4).unwrap();
        let frac = balanced.labels.iter().filter(|&&y| y > 0.0).count() as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "label balance {frac}");

        let again = generate_logistic_data(1000, 3, &[1.0, -1.0, 0.5], 3).unwrap();
        assert_eq!(m.covariates, again.covariates);
        assert_eq!(m.labels, again.labels);
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("toy.csv");
        let data = vec![1.0, -2.5, 0.125];
        save_toy_data_csv(&p, &data).unwrap();
        assert_eq!(load_toy_data_csv(&p).unwrap(), data);

        let m = generate_logistic_data(20, 3, &[1.0, -1.0, 0.5], 8).unwrap();
        let p = dir.path().join("logistic.csv");
        save_logistic_data_csv(&p, &m).unwrap();
        let m2 = load_logistic_data_csv(&p).unwrap();
        assert_eq!(m.covariates, m2.covariates);
        assert_eq!(m.labels, m2.labels);
    }
}
