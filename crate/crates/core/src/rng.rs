//! Seeded random streams.
//!
//! Every random decision in a campaign is drawn from a [`Stream`] whose seed
//! is derived from the master seed and the coordinates of the decision
//! (cell, outer/inner index, method, repeat). Streams are ChaCha8 keystreams,
//! so the output for a given seed is fixed and independent of the order in
//! which runs are scheduled.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a path of coordinates.
///
/// The mapping is a fold of the SplitMix64 finalizer, so distinct paths give
/// unrelated seeds and the same path always gives the same seed.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    let mut h = mix(parent ^ GOLDEN);
    for (depth, &p) in path.iter().enumerate() {
        h = mix(h ^ mix(p.wrapping_add(GOLDEN.wrapping_mul(depth as u64 + 1))));
    }
    h
}

/// Deterministic random stream.
#[derive(Clone, Debug)]
pub struct Stream {
    inner: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A stream seeded by `derive_seed(seed, path)`.
    pub fn derived(seed: u64, path: &[u64]) -> Self {
        Self::new(derive_seed(seed, path))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. Uses Lemire's multiply-and-reject method,
    /// so the result is unbiased.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            let low = m as u64;
            if low >= n || low >= n.wrapping_neg() % n {
                return (m >> 64) as usize;
            }
        }
    }

    /// Standard normal variate via the Box-Muller transform. Each call
    /// consumes exactly two uniforms and discards the sine branch, so the
    /// stream position after `k` draws is always `2k`.
    pub fn standard_normal(&mut self) -> f64 {
        // u1 in (0, 1] keeps ln finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Shuffles the first `k` positions of `items` with a partial
    /// Fisher-Yates pass; those positions then hold a uniform sample without
    /// replacement, in draw order.
    pub fn partial_shuffle<T>(&mut self, items: &mut [T], k: usize) {
        let n = items.len();
        for i in 0..k.min(n) {
            let j = i + self.below(n - i);
            items.swap(i, j);
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        let n = items.len();
        self.partial_shuffle(items, n);
    }

    /// `k` distinct indices from `0..n`, uniformly, in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.partial_shuffle(&mut idx, k);
        idx.truncate(k.min(n));
        idx
    }
}
