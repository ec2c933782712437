//! Seeded random streams.
//!
//! Every Monte Carlo quantity is drawn from a generator derived from the
//! master seed plus a small tuple of tags (trial index, block index, purpose).
//! Streams never depend on execution order, so trials can run in any order
//! or in parallel and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent generator from `seed` and a list of tags.
pub fn stream(seed: u64, tags: &[u64]) -> SimRng {
    let mut h = splitmix64(seed);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    SimRng::seed_from_u64(h)
}

/// Purpose tags so that streams for different quantities never collide.
pub mod tag {
    pub const SYMBOLS: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const TARGET: u64 = 3;
    pub const SCHEDULE: u64 = 4;
    pub const GAIN: u64 = 5;
    pub const CALIBRATION: u64 = 6;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, &[1, 2]).random();
        let b: u64 = stream(7, &[1, 2]).random();
        let c: u64 = stream(7, &[2, 1]).random();
        let d: u64 = stream(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
