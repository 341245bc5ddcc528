//! Trend checks as the data set grows: the almost-linear-cost schedules
//! (SGLD with n = 1, Euler with shrinking step) should drive the expected
//! MSE down, while an ERE schedule with alpha + beta < 1 should not decay.
//!
//! Each grid point averages over fresh datasets drawn from the same truth;
//! MSE values come from the closed-form oracle per dataset, ERE from
//! replicated chains.

use std::path::Path;
use std::time::Instant;

use langevin_core::{
    estimate_ere, ChainSpec, GaussianConjugateModel, Kernel, MinibatchScheme, NoiseModel,
    SamplingMode, ToyAnalytic,
};

use crate::config::GrowNConfig;
use crate::output::{fnum, write_summary, Table};
use crate::CliError;

fn dataset(cfg: &GrowNConfig, data_size: usize, idx: u64) -> Result<GaussianConjugateModel, CliError> {
    let data = langevin_core::generate_toy_data(
        cfg.theta_truth,
        cfg.sigma_x_sq,
        data_size,
        cfg.seed.wrapping_add(idx),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    GaussianConjugateModel::new(cfg.sigma_theta_sq, cfg.sigma_x_sq, data)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (k * (k - 1.0))).sqrt())
}

pub fn run(cfg: &GrowNConfig) -> Result<(), CliError> {
    let mut table = Table::new(vec![
        "config", "data_size", "n", "r", "h", "m_steps", "metric", "value", "value_se", "diverged",
    ]);
    let mut trends: serde_json::Map<String, serde_json::Value> = Default::default();
    let eps = cfg.epsilon_exponent;
    let mut dataset_idx = 0u64;

    for name in &cfg.configs {
        let mut means = Vec::with_capacity(cfg.data_sizes.len());
        for &data_size in &cfg.data_sizes {
            let started = Instant::now();
            let nf = data_size as f64;
            let mut values = Vec::with_capacity(cfg.dataset_replicates);
            let mut diverged = 0usize;
            let (mut n, mut r, mut h, mut m) = (0usize, 0.0, 0.0, 0u64);
            for _ in 0..cfg.dataset_replicates {
                let model = dataset(cfg, data_size, dataset_idx)?;
                dataset_idx += 1;
                let (mu_p, sigma_p_sq, a_coef) = model.posterior_params();
                match name.as_str() {
                    "sgld" => {
                        n = 1;
                        m = nf.powf(1.0 + 2.0 * eps).round() as u64;
                        h = nf.powf(-1.0 - eps);
                        r = h * a_coef;
                        let scheme = MinibatchScheme::new(1, SamplingMode::WithoutReplacement);
                        let ta = ToyAnalytic::new(&model, &scheme)
                            .map_err(|e| CliError::Config(e.to_string()))?;
                        values.push(
                            ta.mse2(h, m as usize, 0.0, NoiseModel::Sgld)
                                .map_err(|e| CliError::Config(e.to_string()))?,
                        );
                    }
                    "euler" => {
                        n = data_size;
                        m = nf.powf(1.0 + 2.0 * eps).round() as u64;
                        r = nf.powf(-eps);
                        h = r / a_coef;
                        let scheme = MinibatchScheme::full_batch(data_size);
                        let ta = ToyAnalytic::new(&model, &scheme)
                            .map_err(|e| CliError::Config(e.to_string()))?;
                        values.push(
                            ta.mse2(h, m as usize, 0.0, NoiseModel::Sgld)
                                .map_err(|e| CliError::Config(e.to_string()))?,
                        );
                    }
                    "ere" => {
                        n = (nf.powf(cfg.ere_beta).round() as usize).clamp(1, data_size);
                        m = nf.powf(cfg.ere_gamma).round() as u64;
                        r = nf.powf(-cfg.ere_alpha);
                        h = r / a_coef;
                        let scheme =
                            MinibatchScheme::new(n, SamplingMode::WithoutReplacement);
                        let spec = ChainSpec::new(h, m, vec![mu_p], cfg.seed)
                            .with_chain_id(dataset_idx * cfg.chain_replicates as u64);
                        let s = estimate_ere(
                            &Kernel::Sgld,
                            &model,
                            Some(&scheme),
                            &spec,
                            sigma_p_sq,
                            cfg.chain_replicates,
                        )?;
                        diverged += s.diverged;
                        values.push(s.mean());
                    }
                    _ => unreachable!("validated config name"),
                }
            }
            let (mean, se) = mean_se(&values);
            means.push(mean);
            table.push(
                vec![
                    name.clone(),
                    data_size.to_string(),
                    n.to_string(),
                    fnum(r),
                    fnum(h),
                    m.to_string(),
                    if name == "ere" { "ere" } else { "mse2" }.into(),
                    fnum(mean),
                    fnum(se),
                    diverged.to_string(),
                ],
                started,
            );
        }
        let decreasing = means.windows(2).all(|w| w[1] < w[0]);
        let non_decreasing = means.windows(2).all(|w| w[1] >= w[0]);
        trends.insert(
            name.clone(),
            serde_json::json!({
                "values": means,
                "decreasing": decreasing,
                "non_decreasing": non_decreasing,
            }),
        );
    }

    let out = Path::new(&cfg.out);
    table.write(out)?;
    write_summary(
        out,
        &serde_json::json!({ "experiment": "grow-n", "trends": trends }),
    )
}
