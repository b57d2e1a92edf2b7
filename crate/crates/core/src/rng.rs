//! Seeded random substreams.
//!
//! Every random draw in a run is taken from a generator derived from the
//! master seed, a purpose tag and an index, so the order in which work is
//! scheduled never changes the numbers drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for [`substream`].
pub mod purpose {
    pub const MLE_RESTARTS: u64 = 0x4d4c_4500;
    pub const PROPOSAL: u64 = 0x5052_4f50;
    pub const LORENZ_REPLICATE: u64 = 0x4c52_5a00;
    pub const LORENZ_INITIAL: u64 = 0x4c52_5a49;
    pub const LORENZ_OBSERVED: u64 = 0x4c52_5a4f;
    pub const DATASET: u64 = 0x4441_5441;
    pub const STREAM_OFFSET: u64 = 0x4f46_4653;
    pub const ORACLE: u64 = 0x4f52_4143;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a purpose tag and an index into a new seed.
pub fn derive_seed(master: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ purpose) ^ index)
}

/// Generator for one `(master, purpose, index)` substream.
pub fn substream(master: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, purpose, index))
}
