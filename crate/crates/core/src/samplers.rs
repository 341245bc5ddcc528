//! One-step transition kernels and the deterministic chain runner.
//!
//! Kernels are pure functions of `(state, noise)`; all randomness lives in
//! [`ChainRng`], which gives each chain disjoint minibatch and noise
//! substreams. The runner streams per-coordinate moment sums instead of
//! storing trajectories; traces are thinned-on-request only.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gradients::{
    estimate_gradient_covariance, estimate_gradient_into, CovarianceEstimate, MinibatchSampler,
    MinibatchScheme,
};
use crate::models::Model;
use crate::rng::ChainRng;

/// Where the mSGLD noise multiplier gets its covariance of `fhat`.
#[derive(Debug, Clone)]
pub enum CovSource {
    /// A fixed matrix known in closed form (toy model: `[[Var B]]`).
    Fixed(DMatrix<f64>),
    /// Re-estimated each step from the current minibatch.
    Estimated,
}

#[derive(Debug, Clone)]
pub enum Kernel {
    /// Euler-Maruyama with the exact full-data drift.
    Euler,
    Sgld,
    Msgld(CovSource),
    Rwm { proposal_scale: f64 },
}

/// Step size, length, start point and seeding of one chain.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub h: f64,
    pub steps: u64,
    pub theta0: Vec<f64>,
    pub seed: u64,
    pub chain_id: u64,
    /// Steps discarded from statistics (states still evolve). Default 0.
    pub burn_in: u64,
    /// Record every `thin`-th post-update state when set.
    pub trace_thin: Option<u64>,
}

impl ChainSpec {
    pub fn new(h: f64, steps: u64, theta0: Vec<f64>, seed: u64) -> Self {
        ChainSpec {
            h,
            steps,
            theta0,
            seed,
            chain_id: 0,
            burn_in: 0,
            trace_thin: None,
        }
    }

    pub fn with_chain_id(mut self, chain_id: u64) -> Self {
        self.chain_id = chain_id;
        self
    }

    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive and finite, got {}",
                self.h
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("need at least one step".into()));
        }
        if self.burn_in >= self.steps {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} must be smaller than chain length {}",
                self.burn_in, self.steps
            )));
        }
        if self.theta0.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite initial state".into()));
        }
        if self.trace_thin == Some(0) {
            return Err(Error::InvalidArgument("trace thinning must be >= 1".into()));
        }
        Ok(())
    }
}

/// Streaming per-coordinate sums of `theta^p`, p = 1..4. Merging stats of
/// disjoint step ranges equals stats of the concatenated range.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub count: u64,
    /// `sums[p-1][c]` holds the running sum of `theta_c^p`.
    pub sums: [Vec<f64>; 4],
}

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        RunningStats {
            count: 0,
            sums: std::array::from_fn(|_| vec![0.0; dim]),
        }
    }

    pub fn dim(&self) -> usize {
        self.sums[0].len()
    }

    pub fn push(&mut self, theta: &[f64]) {
        debug_assert_eq!(theta.len(), self.dim());
        self.count += 1;
        for (c, &t) in theta.iter().enumerate() {
            let t2 = t * t;
            self.sums[0][c] += t;
            self.sums[1][c] += t2;
            self.sums[2][c] += t2 * t;
            self.sums[3][c] += t2 * t2;
        }
    }

    pub fn merge(&mut self, other: &RunningStats) {
        debug_assert_eq!(self.dim(), other.dim());
        self.count += other.count;
        for p in 0..4 {
            for (a, b) in self.sums[p].iter_mut().zip(&other.sums[p]) {
                *a += b;
            }
        }
    }

    /// Sample average of `theta_c^p` over the pushed states.
    pub fn moment(&self, p: usize, c: usize) -> f64 {
        assert!((1..=4).contains(&p), "moment order must be 1..4");
        self.sums[p - 1][c] / self.count as f64
    }

    pub fn mean(&self, c: usize) -> f64 {
        self.moment(1, c)
    }

    pub fn variance(&self, c: usize) -> f64 {
        let m = self.mean(c);
        self.moment(2, c) - m * m
    }
}

/// Euler-Maruyama with exact drift: `theta' = theta + h f(theta) + sqrt(h) xi`.
pub fn euler_step(
    model: &dyn Model,
    theta: &[f64],
    h: f64,
    xi: &[f64],
    drift_buf: &mut [f64],
    out: &mut [f64],
) {
    model.drift(theta, drift_buf);
    let sh = h.sqrt();
    for c in 0..theta.len() {
        out[c] = theta[c] + h * drift_buf[c] + sh * xi[c];
    }
}

/// SGLD: `theta' = theta + h fhat + sqrt(h) xi` with `fhat = 1/2 grad-log-pi-hat`.
pub fn sgld_step(fhat: &[f64], theta: &[f64], h: f64, xi: &[f64], out: &mut [f64]) {
    let sh = h.sqrt();
    for c in 0..theta.len() {
        out[c] = theta[c] + h * fhat[c] + sh * xi[c];
    }
}

/// mSGLD: `theta' = theta + h fhat + sqrt(h) (I - (h/2) Cov fhat) xi`.
/// Returns `true` when the multiplier has an eigenvalue <= 0 (noise collapse);
/// the step is still taken as-is so experiments can observe the instability.
pub fn msgld_step(
    fhat: &[f64],
    cov: &CovarianceEstimate,
    theta: &[f64],
    h: f64,
    xi: &[f64],
    out: &mut [f64],
) -> bool {
    let d = theta.len();
    let sh = h.sqrt();
    if d == 1 {
        let g = 1.0 - 0.5 * h * cov.matrix[(0, 0)];
        out[0] = theta[0] + h * fhat[0] + sh * g * xi[0];
        return g <= 0.0;
    }
    let mut mult = DMatrix::identity(d, d);
    mult -= (0.5 * h) * &cov.matrix;
    for c in 0..d {
        let mut acc = 0.0;
        for r in 0..d {
            acc += mult[(c, r)] * xi[r];
        }
        out[c] = theta[c] + h * fhat[c] + sh * acc;
    }
    // multiplier is I - (h/2)C with C symmetric PSD; eigenvalue <= 0 iff
    // lambda_max((h/2)C) >= 1
    mult.symmetric_eigen().eigenvalues.iter().any(|&l| l <= 0.0)
}

/// One Random-Walk-Metropolis step with an isotropic Gaussian proposal and
/// the exact full-data posterior. Returns whether the proposal was accepted.
pub fn rwm_step(
    model: &dyn Model,
    theta: &mut [f64],
    log_density: &mut f64,
    proposal_scale: f64,
    rng: &mut ChainRng,
    proposal_buf: &mut [f64],
) -> bool {
    rng.fill_standard_normal(proposal_buf);
    for (p, &t) in proposal_buf.iter_mut().zip(theta.iter()) {
        *p = t + proposal_scale * *p;
    }
    let proposed = model.log_density(proposal_buf);
    // accept uniform comes from the minibatch stream so the noise stream
    // stays a pure Gaussian sequence shared with the Langevin kernels
    let u: f64 = rng.minibatch.gen();
    if u.ln() < proposed - *log_density {
        theta.copy_from_slice(proposal_buf);
        *log_density = proposed;
        true
    } else {
        false
    }
}

/// Everything a finished chain reports: streamed moments plus diagnostics.
#[derive(Debug, Clone)]
pub struct ChainReport {
    pub stats: RunningStats,
    /// mSGLD steps whose noise multiplier had an eigenvalue <= 0.
    pub noise_collapse_count: u64,
    /// RWM acceptances (0 for the Langevin kernels).
    pub accepted: u64,
    pub trace: Option<Vec<(u64, Vec<f64>)>>,
    /// Final post-update state.
    pub final_state: Vec<f64>,
}

/// Runs `spec.steps` transitions of `kernel` and streams statistics over the
/// post-update states `theta_1 .. theta_K` (minus burn-in). Minibatch draws
/// and Gaussian noise come from disjoint substreams of `(seed, chain_id)`,
/// so trajectories are bit-for-bit reproducible and independent of thread
/// scheduling.
pub fn run_chain(
    kernel: &Kernel,
    model: &dyn Model,
    scheme: Option<&MinibatchScheme>,
    spec: &ChainSpec,
) -> Result<ChainReport> {
    spec.validate()?;
    let d = model.dim();
    if spec.theta0.len() != d {
        return Err(Error::InvalidArgument(format!(
            "initial state has dimension {}, model has {}",
            spec.theta0.len(),
            d
        )));
    }
    let needs_scheme = matches!(kernel, Kernel::Sgld | Kernel::Msgld(_));
    let scheme = match (needs_scheme, scheme) {
        (true, None) => {
            return Err(Error::InvalidArgument(
                "SGLD/mSGLD kernels require a minibatch scheme".into(),
            ))
        }
        (true, Some(s)) => {
            s.validate(model.data_len())?;
            if matches!(kernel, Kernel::Msgld(CovSource::Estimated)) && s.n < 2 {
                return Err(Error::InsufficientSample {
                    required: 2,
                    got: s.n,
                });
            }
            Some(s)
        }
        (false, _) => None,
    };
    if let Kernel::Rwm { proposal_scale } = kernel {
        if !(*proposal_scale > 0.0) {
            return Err(Error::InvalidArgument(
                "RWM proposal scale must be positive".into(),
            ));
        }
    }

    let mut rng = ChainRng::new(spec.seed, spec.chain_id);
    let mut theta = spec.theta0.clone();
    let mut next = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let mut fhat = vec![0.0; d];
    let mut drift_buf = vec![0.0; d];
    let mut indices: Vec<usize> = Vec::new();
    let mut sampler = MinibatchSampler::new(model.data_len());
    let mut stats = RunningStats::new(d);
    let mut trace = spec.trace_thin.map(|_| Vec::new());
    let mut noise_collapse_count = 0u64;
    let mut accepted = 0u64;
    let mut log_density = match kernel {
        Kernel::Rwm { .. } => model.log_density(&theta),
        _ => 0.0,
    };

    for step in 0..spec.steps {
        match kernel {
            Kernel::Euler => {
                rng.fill_standard_normal(&mut xi);
                euler_step(model, &theta, spec.h, &xi, &mut drift_buf, &mut next);
                theta.copy_from_slice(&next);
            }
            Kernel::Sgld => {
                let s = scheme.unwrap();
                if s.is_full_batch(model.data_len()) {
                    // full batch: fhat is exact; evaluate it the same way
                    // Euler does so the collapse is bit-for-bit
                    model.drift(&theta, &mut fhat);
                } else {
                    sampler.sample_into(s, &mut rng.minibatch, &mut indices)?;
                    estimate_gradient_into(model, &theta, &indices, &mut fhat)?;
                }
                rng.fill_standard_normal(&mut xi);
                sgld_step(&fhat, &theta, spec.h, &xi, &mut next);
                theta.copy_from_slice(&next);
            }
            Kernel::Msgld(src) => {
                let s = scheme.unwrap();
                sampler.sample_into(s, &mut rng.minibatch, &mut indices)?;
                estimate_gradient_into(model, &theta, &indices, &mut fhat)?;
                let cov = match src {
                    CovSource::Fixed(m) => CovarianceEstimate { matrix: m.clone() },
                    CovSource::Estimated => {
                        estimate_gradient_covariance(model, &theta, &indices, s.mode)?
                    }
                };
                rng.fill_standard_normal(&mut xi);
                if msgld_step(&fhat, &cov, &theta, spec.h, &xi, &mut next) {
                    noise_collapse_count += 1;
                }
                theta.copy_from_slice(&next);
            }
            Kernel::Rwm { proposal_scale } => {
                if rwm_step(
                    model,
                    &mut theta,
                    &mut log_density,
                    *proposal_scale,
                    &mut rng,
                    &mut next,
                ) {
                    accepted += 1;
                }
            }
        }

        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { step });
        }
        if step >= spec.burn_in {
            stats.push(&theta);
        }
        if let (Some(trace), Some(thin)) = (trace.as_mut(), spec.trace_thin) {
            if step % thin == 0 {
                trace.push((step, theta.clone()));
            }
        }
    }

    Ok(ChainReport {
        stats,
        noise_collapse_count,
        accepted,
        trace,
        final_state: theta,
    })
}
