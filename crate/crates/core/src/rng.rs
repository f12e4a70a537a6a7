//! Seeded randomness.
//!
//! ChaCha8 keyed by `seed_from_u64`; every derived draw is computed here from
//! raw 64-bit outputs so that the value sequence for a seed is fixed by this
//! file alone.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct Rng(ChaCha8Rng);

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `index`-th stream derived from `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5eed)))
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `0..n` by rejection sampling. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi);
        let span = (hi as i128 - lo as i128 + 1) as u128;
        if span > u64::MAX as u128 {
            return self.next_u64() as i64;
        }
        (lo as i128 + self.below(span as u64) as i128) as i64
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn coin(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }
}

#[cfg(test)]
mod tests {
    use super::Rng;
    use proptest::{prop_assert, proptest};

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn degenerate_range() {
        let mut r = Rng::new(1);
        assert_eq!(r.range_i64(5, 5), 5);
    }

    #[test]
    fn coin_is_roughly_fair() {
        let mut r = Rng::new(3);
        let n = 10_000;
        let heads = (0..n).filter(|_| r.coin()).count() as f64;
        // 3 sigma for p = 0.5 is 150 at n = 10k
        assert!((heads - 5000.0).abs() < 150.0, "{heads}");
    }

    proptest! {
        #[test]
        fn range_stays_in_bounds(seed: u64, lo in -10_000i64..10_000, w in 0i64..5000) {
            let mut r = Rng::new(seed);
            let v = r.range_i64(lo, lo + w);
            prop_assert!(v >= lo && v <= lo + w);
        }

        #[test]
        fn unit_in_half_open_interval(seed: u64) {
            let mut r = Rng::new(seed);
            let u = r.unit();
            prop_assert!((0.0..1.0).contains(&u));
        }
    }
}
