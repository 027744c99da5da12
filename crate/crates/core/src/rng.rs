//! Deterministic per-role random streams.
//!
//! Every random quantity in a run is drawn from a stream derived from
//! `(master_seed, role tag, replication, agent)`. Streams never alias, so
//! trajectories are reproducible regardless of execution order or worker
//! count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Stream = ChaCha8Rng;

/// Role tags keeping derived streams disjoint.
pub mod tag {
    /// Initial global iterate direction.
    pub const INIT: u64 = 0x01;
    /// Per-agent gradient sampling.
    pub const AGENT: u64 = 0x02;
    /// Per-agent frozen data sets.
    pub const DATA: u64 = 0x03;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix `words` into `master` one at a time through SplitMix64.
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &w in words {
        state = splitmix64(state ^ splitmix64(w));
    }
    state
}

pub fn derive_stream(master: u64, words: &[u64]) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(master, words))
}

/// d independent draws from N(0, 1).
pub fn standard_normal_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}
