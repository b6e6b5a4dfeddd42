//! Deterministic seed derivation.
//!
//! Every random stream in the crate (per-tree bootstraps, per-(tree, variable)
//! permutations, noise columns, CV folds) is seeded from a master seed plus a
//! component tag and an index, so results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RandomSeed(pub u64);

impl RandomSeed {
    pub fn new(master: u64) -> Self {
        RandomSeed(master)
    }

    pub fn master(self) -> u64 {
        self.0
    }

    /// Seed for the `index`-th member of component `tag`.
    pub fn derive(self, tag: &str, index: u64) -> RandomSeed {
        // FNV-1a over the tag, then splitmix64 finalisers to spread the bits.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in tag.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        let mixed = splitmix64(self.0 ^ splitmix64(h ^ splitmix64(index)));
        RandomSeed(mixed)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for RandomSeed {
    fn from(v: u64) -> Self {
        RandomSeed(v)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
