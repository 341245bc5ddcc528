//! Deterministic per-chain randomness.
//!
//! Every chain owns two ChaCha12 streams derived from `(seed, chain_id)`:
//! one for minibatch index draws, one for the injected Gaussian noise.
//! The streams are disjoint, so changing the subsample size `n` (which
//! changes how much the minibatch stream is consumed) leaves the noise
//! sequence untouched. Replicates use distinct `chain_id`s under the same
//! seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

const MINIBATCH_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const STREAMS_PER_CHAIN: u64 = 2;

/// The pair of independent generators owned by one chain.
#[derive(Debug, Clone)]
pub struct ChainRng {
    pub minibatch: ChaCha12Rng,
    pub noise: ChaCha12Rng,
}

impl ChainRng {
    pub fn new(seed: u64, chain_id: u64) -> Self {
        let mut minibatch = ChaCha12Rng::seed_from_u64(seed);
        minibatch.set_stream(STREAMS_PER_CHAIN * chain_id + MINIBATCH_STREAM);
        let mut noise = ChaCha12Rng::seed_from_u64(seed);
        noise.set_stream(STREAMS_PER_CHAIN * chain_id + NOISE_STREAM);
        ChainRng { minibatch, noise }
    }

    /// Fills `out` with independent standard normal draws from the noise stream.
    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.noise.sample(StandardNormal);
        }
    }
}
