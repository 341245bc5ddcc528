//! Logistic-regression posterior-mean MSE for SGLD vs mSGLD, judged
//! against a long random-walk Metropolis reference.
//!
//! The reference is run twice on disjoint noise streams; the two means must
//! agree within 3 combined batch-means standard errors, and acceptance
//! rates outside a sanity band trigger a warning with diagnostics. The
//! sweep reports raw squared error of the time-averaged coefficients in
//! parameter space.

use std::path::Path;
use std::time::Instant;

use langevin_core::{
    estimate_mse, run_chain, ChainSpec, CovSource, Kernel, LogisticRegressionModel,
    MinibatchScheme, Model,
};

use crate::config::{parse_methods, LogisticConfig, Method};
use crate::output::{fnum, write_summary, Table};
use crate::CliError;

struct RwmRun {
    mean: Vec<f64>,
    se: Vec<f64>,
    acceptance: f64,
}

/// Long RWM chain with batch-means standard errors (100 batches over the
/// post-burn-in trace), robust to autocorrelation.
fn rwm_reference(
    cfg: &LogisticConfig,
    model: &LogisticRegressionModel,
    chain_id: u64,
) -> Result<RwmRun, CliError> {
    let kept = cfg.rwm.steps - cfg.rwm.burn_in;
    let thin = (kept / 20_000).max(1);
    let mut spec = ChainSpec::new(
        1.0, // h is unused by RWM; the proposal scale drives the kernel
        cfg.rwm.steps,
        vec![0.0; model.dim()],
        cfg.seed,
    )
    .with_burn_in(cfg.rwm.burn_in)
    .with_chain_id(chain_id);
    spec.trace_thin = Some(thin);
    let rep = run_chain(
        &Kernel::Rwm {
            proposal_scale: cfg.rwm.proposal_scale,
        },
        model,
        None,
        &spec,
    )?;
    let acceptance = rep.accepted as f64 / cfg.rwm.steps as f64;

    let trace: Vec<Vec<f64>> = rep
        .trace
        .expect("trace requested")
        .into_iter()
        .filter(|(step, _)| *step > cfg.rwm.burn_in)
        .map(|(_, v)| v)
        .collect();
    let d = model.dim();
    let batches = 100.min(trace.len());
    let per_batch = trace.len() / batches;
    let mut se = vec![0.0; d];
    for c in 0..d {
        let bm: Vec<f64> = (0..batches)
            .map(|b| {
                trace[b * per_batch..(b + 1) * per_batch]
                    .iter()
                    .map(|v| v[c])
                    .sum::<f64>()
                    / per_batch as f64
            })
            .collect();
        let k = bm.len() as f64;
        let m = bm.iter().sum::<f64>() / k;
        let ss: f64 = bm.iter().map(|v| (v - m) * (v - m)).sum();
        se[c] = (ss / (k * (k - 1.0))).sqrt();
    }
    let mean = (0..d).map(|c| rep.stats.mean(c)).collect();
    Ok(RwmRun {
        mean,
        se,
        acceptance,
    })
}

pub fn run(cfg: &LogisticConfig) -> Result<(), CliError> {
    let model = langevin_core::generate_logistic_data(
        cfg.data_size,
        cfg.dim,
        &cfg.beta_true,
        cfg.data_seed,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let d = model.dim();

    // reference chain ids sit far above the sweep's id range
    let ref1 = rwm_reference(cfg, &model, 1_000_000)?;
    let ref2 = rwm_reference(cfg, &model, 1_000_001)?;
    for (tag, run) in [("run1", &ref1), ("run2", &ref2)] {
        if !(0.05..=0.70).contains(&run.acceptance) {
            eprintln!(
                "warning: RWM {tag} acceptance {:.3} outside [0.05, 0.70]; \
                 mean = {:?}; consider tuning rwm.proposal_scale = {}",
                run.acceptance, run.mean, cfg.rwm.proposal_scale
            );
        }
    }
    let consistent = (0..d).all(|c| {
        let tol = 3.0 * (ref1.se[c] * ref1.se[c] + ref2.se[c] * ref2.se[c]).sqrt();
        (ref1.mean[c] - ref2.mean[c]).abs() <= tol
    });
    if !consistent {
        eprintln!(
            "warning: RWM reference runs disagree beyond 3 s.e.: {:?} vs {:?}",
            ref1.mean, ref2.mean
        );
    }
    let beta_ref = ref1.mean.clone();

    let methods = parse_methods(&cfg.methods)?;
    let mut table = Table::new(vec![
        "method",
        "n",
        "steps",
        "effective_passes",
        "mse",
        "mse_se",
        "diverged",
        "noise_collapse",
    ]);
    let mut chain_id = 0u64;
    for &method in &methods {
        for &n in &cfg.n_values {
            let scheme = MinibatchScheme::new(n, cfg.sampling_mode());
            scheme
                .validate(cfg.data_size)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let kernel = match method {
                Method::Msgld => Kernel::Msgld(CovSource::Estimated),
                _ => Kernel::Sgld,
            };
            for &steps in &cfg.steps_values {
                let started = Instant::now();
                let spec = ChainSpec::new(cfg.h, steps, vec![0.0; d], cfg.seed)
                    .with_chain_id(chain_id);
                chain_id += cfg.replicates as u64;
                let summary = estimate_mse(
                    &kernel,
                    &model,
                    Some(&scheme),
                    &spec,
                    |rep| {
                        (0..d)
                            .map(|c| {
                                let e = rep.stats.mean(c) - beta_ref[c];
                                e * e
                            })
                            .sum::<f64>()
                    },
                    0.0,
                    cfg.replicates,
                )?;
                table.push(
                    vec![
                        method.name().into(),
                        n.to_string(),
                        steps.to_string(),
                        fnum(steps as f64 * n as f64 / cfg.data_size as f64),
                        fnum(summary.mean()),
                        fnum(summary.mean_standard_error()),
                        summary.diverged.to_string(),
                        summary.noise_collapse_total.to_string(),
                    ],
                    started,
                );
            }
        }
    }

    let out = Path::new(&cfg.out);
    table.write(out)?;
    write_summary(
        out,
        &serde_json::json!({
            "experiment": "logistic",
            "beta_ref": beta_ref,
            "rwm": {
                "run1": { "mean": ref1.mean, "se": ref1.se, "acceptance": ref1.acceptance },
                "run2": { "mean": ref2.mean, "se": ref2.se, "acceptance": ref2.acceptance },
                "consistent_within_3se": consistent,
            },
        }),
    )
}
