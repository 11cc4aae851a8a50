//! Deterministic seed substreams.
//!
//! Every random phase of a run draws from its own ChaCha stream whose seed is
//! a hash of the master seed and the phase coordinates, so results do not
//! depend on the order in which phases execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a base seed together with any number of stream coordinates.
pub fn derive(base: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(base), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn substream(base: u64, coords: &[u64]) -> ChaCha8Rng {
    rng(derive(base, coords))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_matter() {
        assert_ne!(derive(1, &[0, 0]), derive(1, &[0, 1]));
        assert_ne!(derive(1, &[0, 1]), derive(1, &[1, 0]));
        assert_ne!(derive(1, &[2]), derive(2, &[2]));
        assert_eq!(derive(7, &[3, 4]), derive(7, &[3, 4]));
    }
}
