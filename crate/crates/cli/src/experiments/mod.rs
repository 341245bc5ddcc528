pub mod bias;
pub mod cost;
pub mod grow_n;
pub mod logistic;
pub mod mse;
pub mod weak_order;

use langevin_core::{CovSource, Kernel, MinibatchScheme, ToyAnalytic};
use nalgebra::DMatrix;

use crate::config::Method;
use crate::CliError;

/// Builds the sampler kernel for a toy-model grid point. mSGLD gets the
/// closed-form `Var(B)` as a fixed 1x1 covariance; Euler/SGLD carry none.
pub fn toy_kernel(method: Method, analytic: &ToyAnalytic) -> Kernel {
    match method {
        Method::Euler => Kernel::Euler,
        Method::Sgld => Kernel::Sgld,
        Method::Msgld => Kernel::Msgld(CovSource::Fixed(DMatrix::from_element(
            1,
            1,
            analytic.var_b,
        ))),
    }
}

/// Euler rows use the full batch; minibatch methods use the configured n.
pub fn toy_scheme(
    method: Method,
    n: usize,
    data_len: usize,
    mode: langevin_core::SamplingMode,
) -> Result<MinibatchScheme, CliError> {
    let scheme = match method {
        Method::Euler => MinibatchScheme::full_batch(data_len),
        _ => MinibatchScheme::new(n, mode),
    };
    scheme
        .validate(data_len)
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(scheme)
}
