//! Deterministic seed derivation.
//!
//! Every random stream in the crate is seeded from a master seed mixed with
//! a key describing what the stream is for, so results never depend on the
//! order in which work items are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with an ordered list of key components.
pub fn derive_seed(master: u64, key: &[u64]) -> u64 {
    key.iter()
        .fold(splitmix(master), |acc, &k| splitmix(acc ^ splitmix(k)))
}

/// Stream purpose tags, kept stable so seeds stay stable across releases.
pub mod stream {
    pub const DATASET: u64 = 1;
    pub const OUTCOME: u64 = 2;
    pub const CALIBRATION: u64 = 3;
    pub const GBM: u64 = 4;
    pub const CBPS: u64 = 5;
}

pub fn rng_for(master: u64, key: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, key))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_keys_give_distinct_seeds() {
        let a = derive_seed(7, &[1, 2, 3]);
        let b = derive_seed(7, &[1, 3, 2]);
        let c = derive_seed(8, &[1, 2, 3]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, &[1, 2, 3]));
    }
}
