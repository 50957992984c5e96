//! Deterministic seed derivation for independent random streams.
//!
//! Every stochastic stage (subsampling, reference replicates, per-k fits,
//! synthetic generation) derives its own seed from the user-supplied master
//! seed through a SplitMix64 chain. Streams are therefore independent of each
//! other and of scheduling order, which is what makes reruns byte-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stage tags for [`derive_seed`]. Each stage gets a disjoint stream family.
pub mod stage {
    pub const SUBSAMPLE: u64 = 1;
    pub const REFERENCE: u64 = 2;
    pub const DATA_FIT: u64 = 3;
    pub const REFERENCE_FIT: u64 = 4;
    pub const SYNTH: u64 = 5;
}

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed for stream `index` of `stage` under `master`.
pub fn derive_seed(master: u64, stage: u64, index: u64) -> u64 {
    let mut z = splitmix64(master.wrapping_add(GAMMA));
    z = splitmix64(z ^ splitmix64(stage.wrapping_add(GAMMA)));
    splitmix64(z ^ splitmix64(index.wrapping_add(GAMMA)))
}

/// A ChaCha8 generator seeded for stream `index` of `stage` under `master`.
pub fn stream(master: u64, stage: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stage, index))
}
