//! Fixed-step-size stochastic-gradient Langevin samplers with an analytic
//! Gaussian oracle.
//!
//! The crate is organized around a drift convention: every sampler consumes
//! `f(theta) = 1/2 grad log pi(theta)` (or its minibatch estimate `fhat`),
//! so the continuous-time target of the exact dynamics is the posterior
//! `pi` itself. See [`gradients`] for the estimator and [`toy_analytic`]
//! for the closed-form moment machinery of the conjugate Gaussian model.

pub mod error;
pub mod estimators;
pub mod gradients;
pub mod models;
pub mod rng;
pub mod samplers;
pub mod toy_analytic;

pub use error::{Error, Result};
pub use gradients::{
    estimate_gradient, estimate_gradient_covariance, sample_minibatch, CovarianceEstimate,
    GradientEstimate, MinibatchSampler, MinibatchScheme, SamplingMode,
};
pub use models::{
    generate_logistic_data, generate_toy_data, GaussianConjugateModel, LogisticRegressionModel,
    Model, OuProcess,
};
pub use estimators::{
    estimate_ere, estimate_mse, fit_power_law, optimal_h_curve, OptimalH, PowerLawFit,
    ReplicateSummary,
};
pub use rng::ChainRng;
pub use samplers::{
    euler_step, msgld_step, run_chain, rwm_step, sgld_step, ChainReport, ChainSpec, CovSource,
    Kernel, RunningStats,
};
pub use toy_analytic::{
    analytic_mse2, analytic_mse2_msgld, asymptotic_var_msgld, asymptotic_var_sgld, b_moments,
    b_moments_enumerated, elementary_symmetric, excess_bias_leading_sgld, fit_bias_coefficient,
    moment_trajectory, ou_euler_stationary_variance, power_sums, toy_var_b, BiasFit,
    MomentTrajectory, NoiseModel, ToyAnalytic,
};
