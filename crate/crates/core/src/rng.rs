//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by a
//! `(master_seed, stream_index)` pair. Experiments derive the stream index
//! from a fixed domain constant and the job coordinates (ladder rung,
//! replicate, batch), so a job draws the same numbers whichever worker runs
//! it and in whatever order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Domain constants mixed into derived stream indices.
pub mod domain {
    pub const GENERATE: u64 = 0x01;
    pub const LADDER_TEMPLATE: u64 = 0x10;
    pub const LADDER_DATA: u64 = 0x11;
    pub const RARE_TEMPLATE: u64 = 0x20;
    pub const RARE_TILTED: u64 = 0x21;
    pub const RARE_NAIVE: u64 = 0x22;
    pub const CLT_TEMPLATE: u64 = 0x30;
    pub const SIGMA2_MC: u64 = 0x31;
    pub const LONG_TEMPLATE: u64 = 0x40;
    pub const CONDITION_DIRECTIONS: u64 = 0x41;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngSeed {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Stream index derived from a domain constant and job coordinates.
    pub fn derive(master_seed: u64, domain: u64, coords: &[u64]) -> Self {
        let mut h = splitmix64(domain ^ 0x5851_f42d_4c95_7f2d);
        for &c in coords {
            h = splitmix64(h ^ c.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        }
        Self::new(master_seed, h)
    }

    /// A sub-stream of this one, for generators that need independent parts.
    pub fn child(&self, index: u64) -> Self {
        Self::new(
            self.master_seed,
            splitmix64(self.stream_index ^ splitmix64(index.wrapping_add(1))),
        )
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
