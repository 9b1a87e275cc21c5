//! Seeded random streams.
//!
//! Every trial of an experiment gets its own ChaCha stream whose seed is
//! derived from `(master_seed, trial_index)`. The derived seed is what gets
//! written next to each result row, so a single row can be replayed with
//! [`rng_from_seed`] alone.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of the `index`-th independent stream under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Shorthand for `rng_from_seed(derive_seed(master, index))`.
pub fn stream(master: u64, index: u64) -> TrialRng {
    rng_from_seed(derive_seed(master, index))
}
