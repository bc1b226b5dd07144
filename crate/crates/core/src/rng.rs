//! Portable seeded randomness.
//!
//! Every random draw in the crate goes through [`Prng`], a xoshiro256**
//! generator seeded by SplitMix64 expansion of a 64-bit integer seed. Floats
//! are produced from the top 53 bits of each output word, so a given seed
//! yields the same stream on every platform and in any language that
//! implements the two reference algorithms.

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

#[derive(Clone, Debug)]
pub struct Prng(Xoshiro256StarStar);

impl Prng {
    pub fn new(seed: u64) -> Self {
        Prng(Xoshiro256StarStar::seed_from_u64(seed))
    }

    /// Child stream for a labelled purpose, independent of the parent's position.
    pub fn derive(seed: u64, stream: u64) -> Self {
        Prng::new(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)` by rejection, `n > 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Prng::new(99);
        let mut b = Prng::new(99);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn uniform_stays_in_unit_interval() {
        let mut r = Prng::new(5);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn below_covers_range() {
        let mut r = Prng::new(1);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            seen[r.below(7) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn derived_streams_differ() {
        let mut a = Prng::derive(3, 1);
        let mut b = Prng::derive(3, 2);
        assert_ne!(a.next_u64(), b.next_u64());
    }
}
