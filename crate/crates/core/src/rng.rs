//! Seedable, platform-independent uniform random numbers.
//!
//! The generator is xoshiro256** seeded from a 64-bit value through
//! SplitMix64 (the `rand_xoshiro` crate's `seed_from_u64`). Uniforms on
//! [0, 1) take the top 53 bits of each 64-bit output:
//! `u = (x >> 11) · 2⁻⁵³`. Independent streams for the same seed are obtained
//! by applying the xoshiro `jump` (2¹²⁸ steps) `stream` times, so
//! `(seed, stream)` pins the sequence exactly.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Deterministic stream of independent uniforms on [0, 1).
///
/// Not meant to be shared between concurrent samplers; derive one stream per
/// worker with [`RandomSource::with_stream`].
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    inner: Xoshiro256StarStar,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = Xoshiro256StarStar::seed_from_u64(seed);
        for _ in 0..stream {
            inner.jump();
        }
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * INV_2_53
    }

    /// Uniform on (0, 1), for transforms that need strictly interior values.
    pub fn open_uniform(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform index in `0..n` by Lemire's rejection-free multiply (bias < 2⁻⁶⁴·n).
    pub fn index(&mut self, n: usize) -> usize {
        ((self.inner.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RandomSource::new(42);
        let mut b = RandomSource::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn pinned_first_outputs() {
        // Frozen so any change of generator or seeding is caught.
        let mut r = RandomSource::new(0);
        let first: Vec<u64> = (0..3).map(|_| r.next_u64()).collect();
        let mut again = Xoshiro256StarStar::seed_from_u64(0);
        let expect: Vec<u64> = (0..3).map(|_| again.next_u64()).collect();
        assert_eq!(first, expect);
        assert_eq!(first[0], 0x99ec_5f36_cb75_f2b4);
    }

    #[test]
    fn streams_differ() {
        let mut a = RandomSource::with_stream(7, 0);
        let mut b = RandomSource::with_stream(7, 1);
        let same = (0..100).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn equidistribution_smoke() {
        let mut r = RandomSource::new(123);
        let n = 200_000;
        let mut bins = [0usize; 10];
        let mut sum = 0.0;
        for _ in 0..n {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            bins[(u * 10.0) as usize] += 1;
            sum += u;
        }
        let expected = n as f64 / 10.0;
        let chi2: f64 = bins
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 9 degrees of freedom, 0.999 quantile ≈ 27.9
        assert!(chi2 < 27.9, "chi2 = {chi2}");
        assert!((sum / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn index_in_range() {
        let mut r = RandomSource::new(9);
        for n in [1usize, 2, 7, 100] {
            for _ in 0..100 {
                assert!(r.index(n) < n);
            }
        }
    }
}
