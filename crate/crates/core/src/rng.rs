//! Seeded, splittable random streams.
//!
//! Every random draw in the crate comes from a [`RngSeed`]. Independent
//! sub-streams are addressed by key (realization index, time step, ...) so that
//! results never depend on evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Generator for the root stream of this seed.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Generator for sub-stream `key` of this seed.
    pub fn stream(self, key: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(key);
        rng
    }

    /// A new seed derived from this one and `tag` (splitmix64 finalizer).
    pub fn derive(self, tag: u64) -> RngSeed {
        let mut z = self
            .0
            .wrapping_add(tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

impl Default for RngSeed {
    fn default() -> Self {
        RngSeed(42)
    }
}
