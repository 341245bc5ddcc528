//! Shared fixtures for the criterion benches; no library code of its own.

use langevin_core::{generate_toy_data, GaussianConjugateModel};

/// Conjugate Gaussian model on a synthetic dataset of `n_data` points.
pub fn toy_model(n_data: usize) -> GaussianConjugateModel {
    let data = generate_toy_data(1.0, 1.0, n_data, 11).expect("valid generator arguments");
    GaussianConjugateModel::new(1.0, 1.0, data).expect("valid model")
}
