//! `langevin`: experiment front end for the sampler library.
//!
//! Six subcommands map to the experiment suite: `bias-sweep`, `mse-sweep`,
//! `cost-minimize`, `grow-n`, `logistic`, `weak-order`. Each reads a TOML
//! config (every key optional, `--print-defaults` shows the schema), writes
//! a CSV sweep plus a JSON summary of any fitted quantities, and is
//! deterministic given (config, seed): identical bytes modulo the trailing
//! wall-clock column, at any thread count.

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Bad config or arguments -> exit 2.
    Config(String),
    /// No feasible solution / every replicate diverged -> exit 3.
    Infeasible(String),
    /// Runtime failure (I/O, ...) -> exit 1.
    Other(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<langevin_core::Error> for CliError {
    fn from(e: langevin_core::Error) -> Self {
        match e {
            langevin_core::Error::AllReplicatesDiverged { total } => {
                CliError::Infeasible(format!("all {total} replicates diverged"))
            }
            other => CliError::Other(other.to_string()),
        }
    }
}

/// Flags shared by every subcommand; each overrides the matching config key.
#[derive(Debug, Args)]
struct Common {
    /// TOML config file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides config `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (overrides config `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replicate count (overrides the experiment's replicate knob).
    #[arg(long)]
    replicates: Option<usize>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    threads: Option<usize>,
    /// Print the full default config as TOML and exit.
    #[arg(long)]
    print_defaults: bool,
}

#[derive(Debug, Parser)]
#[command(
    name = "langevin",
    about = "Stochastic-gradient Langevin sampler experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Asymptotic bias of the second moment vs step size (analytic + empirical).
    BiasSweep(Common),
    /// MSE of the time-averaged second moment vs chain length (fixed-N or grow-N).
    MseSweep(Common),
    /// Minimize compute cost M*n subject to MSE_2 <= epsilon^2.
    CostMinimize(Common),
    /// Scaling trends as the data set grows (almost-linear schedules, ERE).
    GrowN(Common),
    /// Logistic-regression posterior-mean MSE with an RWM reference.
    Logistic(Common),
    /// Weak-order check on the Ornstein-Uhlenbeck / Euler pair.
    WeakOrder(Common),
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Other(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::BiasSweep(c) => {
            if c.print_defaults {
                config::print_defaults::<config::BiasSweepConfig>();
                return Ok(());
            }
            init_threads(c.threads)?;
            let mut cfg: config::BiasSweepConfig = config::load_config(c.config.as_deref())?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if let Some(r) = c.replicates {
                cfg.replicates = r;
            }
            if let Some(o) = &c.out {
                cfg.out = o.display().to_string();
            }
            cfg.validate()?;
            experiments::bias::run(&cfg)
        }
        Cmd::MseSweep(c) => {
            if c.print_defaults {
                config::print_defaults::<config::MseSweepConfig>();
                return Ok(());
            }
            init_threads(c.threads)?;
            let mut cfg: config::MseSweepConfig = config::load_config(c.config.as_deref())?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if let Some(r) = c.replicates {
                cfg.empirical_replicates = r;
            }
            if let Some(o) = &c.out {
                cfg.out = o.display().to_string();
            }
            cfg.validate()?;
            experiments::mse::run(&cfg)
        }
        Cmd::CostMinimize(c) => {
            if c.print_defaults {
                config::print_defaults::<config::CostMinimizeConfig>();
                return Ok(());
            }
            init_threads(c.threads)?;
            let mut cfg: config::CostMinimizeConfig = config::load_config(c.config.as_deref())?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if c.replicates.is_some() {
                eprintln!("note: cost-minimize is fully analytic; --replicates has no effect");
            }
            if let Some(o) = &c.out {
                cfg.out = o.display().to_string();
            }
            cfg.validate()?;
            experiments::cost::run(&cfg)
        }
        Cmd::GrowN(c) => {
            if c.print_defaults {
                config::print_defaults::<config::GrowNConfig>();
                return Ok(());
            }
            init_threads(c.threads)?;
            let mut cfg: config::GrowNConfig = config::load_config(c.config.as_deref())?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if let Some(r) = c.replicates {
                cfg.dataset_replicates = r;
            }
            if let Some(o) = &c.out {
                cfg.out = o.display().to_string();
            }
            cfg.validate()?;
            experiments::grow_n::run(&cfg)
        }
        Cmd::Logistic(c) => {
            if c.print_defaults {
                config::print_defaults::<config::LogisticConfig>();
                return Ok(());
            }
            init_threads(c.threads)?;
            let mut cfg: config::LogisticConfig = config::load_config(c.config.as_deref())?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if let Some(r) = c.replicates {
                cfg.replicates = r;
            }
            if let Some(o) = &c.out {
                cfg.out = o.display().to_string();
            }
            cfg.validate()?;
            experiments::logistic::run(&cfg)
        }
        Cmd::WeakOrder(c) => {
            if c.print_defaults {
                config::print_defaults::<config::WeakOrderConfig>();
                return Ok(());
            }
            init_threads(c.threads)?;
            let mut cfg: config::WeakOrderConfig = config::load_config(c.config.as_deref())?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if let Some(r) = c.replicates {
                cfg.replicates = r;
            }
            if let Some(o) = &c.out {
                cfg.out = o.display().to_string();
            }
            cfg.validate()?;
            experiments::weak_order::run(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Infeasible(_) => ExitCode::from(3),
                CliError::Other(_) => ExitCode::from(1),
            }
        }
    }
}
