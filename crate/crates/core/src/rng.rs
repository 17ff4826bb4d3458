//! Seeded random streams.
//!
//! Every consumer of randomness derives its own ChaCha stream from a job
//! seed, a purpose tag and an index, so adding draws in one place never
//! shifts the values another place sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init,
    Shuffle,
    Permutation,
    Split,
    Forest,
    Direction,
    Users,
    Pool,
    Channels,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 0x1111,
            Purpose::Shuffle => 0x2222,
            Purpose::Permutation => 0x3333,
            Purpose::Split => 0x4444,
            Purpose::Forest => 0x5555,
            Purpose::Direction => 0x6666,
            Purpose::Users => 0x7777,
            Purpose::Pool => 0x8888,
            Purpose::Channels => 0x9999,
        }
    }
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    mix(mix(mix(seed) ^ purpose.tag()) ^ index)
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose, index))
}
