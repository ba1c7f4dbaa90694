//! Seedable, splittable counter-based generator.
//!
//! Output `i` of a stream with key `k` is `mix(k + (i + 1) * G)` where
//! `G = 0x9E3779B97F4A7C15` and `mix` is the SplitMix64 finalizer:
//!
//! ```text
//! z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//! z ^= z >> 27; z *= 0x94D049BB133111EB;
//! z ^= z >> 31;
//! ```
//!
//! (all arithmetic wrapping mod 2^64). A stream seeded with `s` therefore
//! reproduces the reference SplitMix64 sequence for seed `s`. Child stream
//! `j` of key `k` has key `mix(k ^ mix(j + S))` with `S = 0xD1B54A32D192ED03`.
//! Any output can be computed directly from `(key, counter)`, so streams can
//! be reproduced in other languages without replaying state.

use rand_core::{impls, RngCore, SeedableRng};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const SPLIT: u64 = 0xD1B5_4A32_D192_ED03;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: seed, counter: 0 }
    }

    /// Independent child stream; does not advance `self`.
    pub fn split(&self, stream: u64) -> Self {
        Self { key: mix64(self.key ^ mix64(stream.wrapping_add(SPLIT))), counter: 0 }
    }

    /// Output at an arbitrary position of this stream.
    pub fn at(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        let out = self.at(self.counter);
        self.counter = self.counter.wrapping_add(1);
        out
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}

impl SeedableRng for CounterRng {
    type Seed = [u8; 8];

    fn from_seed(seed: Self::Seed) -> Self {
        Self::new(u64::from_le_bytes(seed))
    }

    fn seed_from_u64(state: u64) -> Self {
        Self::new(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_splitmix64() {
        // First outputs of SplitMix64 seeded with 1234567.
        let mut r = CounterRng::new(1_234_567);
        let want = [6457827717110365317u64, 3203168211198807973, 9817491932198370423];
        for w in want {
            assert_eq!(r.next_u64(), w);
        }
    }

    #[test]
    fn random_access_agrees_with_stream() {
        let mut r = CounterRng::new(42);
        let direct = r.at(10);
        for _ in 0..10 {
            r.next_u64();
        }
        assert_eq!(r.next_u64(), direct);
    }

    #[test]
    fn split_streams_differ() {
        let root = CounterRng::new(7);
        let mut a = root.split(0);
        let mut b = root.split(1);
        assert_ne!(a.next_u64(), b.next_u64());
        assert_eq!(root.split(3), root.split(3));
    }
}
