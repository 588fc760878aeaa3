//! Seed plumbing.
//!
//! Every run has one master seed. Module seeds are derived from it with a
//! counter-based SplitMix64 mix so that adding a new consumer never shifts the
//! streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers for [`derive_seed`]. Values are part of the
/// reproducibility contract and must not be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Measurements = 1,
    Split = 2,
    Batches = 3,
    CnnInit = 4,
    RbmInit = 5,
    RbmChain = 6,
    RbmData = 7,
    RnnInit = 8,
    RnnSampling = 9,
    Observables = 10,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for `stream`, sub-indexed by `counter` (e.g. a detuning index).
pub fn derive_seed(master: u64, stream: Stream, counter: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream as u64)) ^ counter)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(master: u64, stream: Stream, counter: u64) -> Rng {
    rng_from_seed(derive_seed(master, stream, counter))
}
