//! Seeded random streams.
//!
//! Every stochastic component draws from ChaCha8 (the `rand_chacha` stream
//! cipher generator) keyed by a 64-bit seed. Solvers derive one independent
//! stream per `(iteration, member)` pair through ChaCha's 64-bit stream id,
//! so results never depend on the order in which population members are
//! evaluated.
//!
//! Integer and float draws are implemented here on top of raw `next_u64`
//! output rather than through a distribution library, so generated artifacts
//! are reproducible by any implementation of ChaCha8:
//!
//! * `below(n)`: rejection sampling on the largest multiple of `n` below 2^64.
//! * `unit()`: the top 53 bits of one `next_u64`, scaled by 2^-53, in `[0, 1)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for `seed`, stream 0.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Counted stream for population member `member` at iteration `iteration`.
///
/// Stream 0 is reserved for the plain [`seeded`] generator.
pub fn stream(seed: u64, iteration: usize, member: usize) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = ((iteration as u64 + 1) << 24) ^ (member as u64 + 1);
    rng.set_stream(id);
    rng
}

/// SplitMix64 finalizer, used to derive child seeds (e.g. per replay arrival).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Portable draws on top of any [`RngCore`].
pub trait Draw: RngCore {
    /// Uniform integer in `0..n`; `n` must be positive.
    fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Uniform integer in the closed range `lo..=hi`.
    fn between(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi);
        lo + self.below((hi - lo) as u64 + 1) as usize
    }

    /// Uniform float in `[0, 1)`.
    fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform float in `[lo, hi)`.
    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

impl<R: RngCore + ?Sized> Draw for R {}
