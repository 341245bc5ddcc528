//! Replicated Monte Carlo estimation of bias/variance/MSE/ERE and the
//! regression utilities used by the scaling-law experiments.
//!
//! Replicates are seed-split through the chain id (disjoint ChaCha streams),
//! run in parallel, and collected in replicate order, so results are
//! independent of the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gradients::MinibatchScheme;
use crate::models::{GaussianConjugateModel, Model};
use crate::samplers::{run_chain, ChainReport, ChainSpec, Kernel};
use crate::toy_analytic::{NoiseModel, ToyAnalytic};

/// Per-replicate sample-average values of one scalar statistic, with the
/// ground truth they are judged against.
#[derive(Debug, Clone)]
pub struct ReplicateSummary {
    /// One entry per non-divergent replicate, in replicate order.
    pub values: Vec<f64>,
    pub truth: f64,
    /// Replicates excluded because the chain diverged.
    pub diverged: usize,
    /// Total mSGLD noise-collapse events across surviving replicates.
    pub noise_collapse_total: u64,
}

impl ReplicateSummary {
    pub fn replicates(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance (divisor R) of the replicate averages, so that
    /// `mse() = bias()^2 + variance()` holds exactly.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }

    pub fn bias(&self) -> f64 {
        self.mean() - self.truth
    }

    /// Monte Carlo MSE: mean of squared errors against the truth.
    pub fn mse(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (v - self.truth) * (v - self.truth))
            .sum::<f64>()
            / self.values.len() as f64
    }

    pub fn mean_standard_error(&self) -> f64 {
        let r = self.values.len() as f64;
        let m = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - m) * (v - m)).sum();
        (ss / (r * (r - 1.0))).sqrt()
    }

    /// Jackknife standard error of `mse()` (leave-one-out recomputation).
    pub fn mse_standard_error(&self) -> f64 {
        let r = self.values.len();
        if r < 2 {
            return f64::NAN;
        }
        let d: Vec<f64> = self
            .values
            .iter()
            .map(|v| (v - self.truth) * (v - self.truth))
            .collect();
        let total: f64 = d.iter().sum();
        let loo: Vec<f64> = d.iter().map(|di| (total - di) / (r as f64 - 1.0)).collect();
        let loo_mean = loo.iter().sum::<f64>() / r as f64;
        let ss: f64 = loo.iter().map(|l| (l - loo_mean) * (l - loo_mean)).sum();
        ((r as f64 - 1.0) / r as f64 * ss).sqrt()
    }
}

fn replicate_reports(
    kernel: &Kernel,
    model: &dyn Model,
    scheme: Option<&MinibatchScheme>,
    spec: &ChainSpec,
    replicates: usize,
) -> Result<Vec<std::result::Result<ChainReport, u64>>> {
    if replicates < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicates".into()));
    }
    // validate once up front so config errors surface as errors, not as
    // "all replicates diverged"
    let probe = ChainSpec {
        steps: 1,
        burn_in: 0,
        ..spec.clone()
    };
    run_chain(kernel, model, scheme, &probe)?;

    Ok((0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let rspec = ChainSpec {
                chain_id: spec.chain_id + r,
                ..spec.clone()
            };
            match run_chain(kernel, model, scheme, &rspec) {
                Ok(rep) => Ok(rep),
                Err(Error::Divergence { step }) => Err(step),
                Err(e) => panic!("replicate failed after validation probe: {e}"),
            }
        })
        .collect())
}

/// Runs `replicates` independent chains and summarizes `statistic(report)`
/// against `truth`. Divergent replicates are excluded with a count; an error
/// is returned only when every replicate diverged.
pub fn estimate_mse<F>(
    kernel: &Kernel,
    model: &dyn Model,
    scheme: Option<&MinibatchScheme>,
    spec: &ChainSpec,
    statistic: F,
    truth: f64,
    replicates: usize,
) -> Result<ReplicateSummary>
where
    F: Fn(&ChainReport) -> f64 + Sync,
{
    let reports = replicate_reports(kernel, model, scheme, spec, replicates)?;
    let mut values = Vec::with_capacity(replicates);
    let mut diverged = 0usize;
    let mut noise_collapse_total = 0u64;
    for rep in &reports {
        match rep {
            Ok(rep) => {
                values.push(statistic(rep));
                noise_collapse_total += rep.noise_collapse_count;
            }
            Err(_) => diverged += 1,
        }
    }
    if values.is_empty() {
        return Err(Error::AllReplicatesDiverged { total: replicates });
    }
    Ok(ReplicateSummary {
        values,
        truth,
        diverged,
        noise_collapse_total,
    })
}

/// Expected relative error of the within-chain empirical variance:
/// per replicate `(S_2 - S_1^2) / sigma_p_sq - 1`, summarized against 0.
pub fn estimate_ere(
    kernel: &Kernel,
    model: &dyn Model,
    scheme: Option<&MinibatchScheme>,
    spec: &ChainSpec,
    sigma_p_sq: f64,
    replicates: usize,
) -> Result<ReplicateSummary> {
    if !(sigma_p_sq > 0.0) {
        return Err(Error::InvalidArgument("sigma_p_sq must be positive".into()));
    }
    if spec.steps - spec.burn_in < 2 {
        return Err(Error::InvalidArgument(
            "ERE needs at least 2 retained states (within-chain variance is degenerate)".into(),
        ));
    }
    estimate_mse(
        kernel,
        model,
        scheme,
        spec,
        |rep| {
            let s1 = rep.stats.moment(1, 0);
            let s2 = rep.stats.moment(2, 0);
            (s2 - s1 * s1) / sigma_p_sq - 1.0
        },
        0.0,
        replicates,
    )
}

/// Least-squares fit of `y = prefactor * x^exponent` on log-log scale.
#[derive(Debug, Clone)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Coefficient of determination on the log-log scale.
    pub r_squared: f64,
    pub points_used: usize,
}

pub fn fit_power_law(pairs: &[(f64, f64)]) -> Result<PowerLawFit> {
    let logs: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|&&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 3 {
        return Err(Error::TooFewPoints {
            required: 3,
            got: logs.len(),
        });
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all x values identical; slope undefined".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let syy: f64 = logs.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|p| {
            let e = p.1 - (slope * p.0 + intercept);
            e * e
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r_squared,
        points_used: logs.len(),
    })
}

/// One row of the optimal-step-size table.
#[derive(Debug, Clone)]
pub struct OptimalH {
    pub k: u64,
    pub h_star: f64,
    pub mse_star: f64,
    /// True when the coarse scan was not unimodal and a fine grid decided.
    pub grid_fallback: bool,
}

/// For each chain length K, minimizes the exact `MSE_2(h, M = K)` over
/// `h in (0, 1/A)`: a coarse log-spaced scan brackets the minimum, then
/// golden-section search refines it to relative 1e-6; a non-unimodal scan
/// falls back to a fine grid and says so.
pub fn optimal_h_curve(
    model: &GaussianConjugateModel,
    scheme: &MinibatchScheme,
    k_values: &[u64],
    theta0: f64,
    noise: NoiseModel,
) -> Result<Vec<OptimalH>> {
    let ta = ToyAnalytic::new(model, scheme)?;
    let hi = (1.0 - 1e-9) / ta.a;
    let lo = hi * 1e-6;
    k_values
        .iter()
        .map(|&k| {
            let m_steps = k as usize;
            let f = |h: f64| ta.mse2(h, m_steps, theta0, noise).expect("h inside (0, 1/A)");

            let coarse = 40usize;
            let ratio = (hi / lo).ln() / (coarse as f64 - 1.0);
            let hs: Vec<f64> = (0..coarse).map(|i| lo * (ratio * i as f64).exp()).collect();
            let ys: Vec<f64> = hs.iter().map(|&h| f(h)).collect();
            let argmin = ys
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            // unimodal: non-increasing up to the argmin, non-decreasing after
            let unimodal = ys[..=argmin].windows(2).all(|w| w[1] <= w[0])
                && ys[argmin..].windows(2).all(|w| w[1] >= w[0]);

            if !unimodal {
                let fine = 2000usize;
                let ratio = (hi / lo).ln() / (fine as f64 - 1.0);
                let (mut best_h, mut best_y) = (lo, f(lo));
                for i in 1..fine {
                    let h = lo * (ratio * i as f64).exp();
                    let y = f(h);
                    if y < best_y {
                        best_h = h;
                        best_y = y;
                    }
                }
                return Ok(OptimalH {
                    k,
                    h_star: best_h,
                    mse_star: best_y,
                    grid_fallback: true,
                });
            }

            let mut a = hs[argmin.saturating_sub(1)];
            let mut b = hs[(argmin + 1).min(coarse - 1)];
            let phi = (5.0f64.sqrt() - 1.0) / 2.0;
            let mut c = b - phi * (b - a);
            let mut d = a + phi * (b - a);
            let (mut fc, mut fd) = (f(c), f(d));
            while (b - a) > 1e-6 * b {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - phi * (b - a);
                    fc = f(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + phi * (b - a);
                    fd = f(d);
                }
            }
            let h_star = 0.5 * (a + b);
            Ok(OptimalH {
                k,
                h_star,
                mse_star: f(h_star),
                grid_fallback: false,
            })
        })
        .collect()
}
