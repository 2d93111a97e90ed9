//! Portable seeded randomness.
//!
//! Every stochastic choice in the crate (trace generation, epsilon-greedy
//! exploration, replay sampling, weight initialization) draws from
//! [`SimRng`], a PCG-XSL-RR 128/64 multiplicative-congruential generator
//! (`Pcg64Mcg`: state multiplier `0x2360ed051fc65da44385df649fccf645`)
//! seeded through `rand_core`'s `seed_from_u64` expansion.
//!
//! Derived draws are defined here rather than borrowed from a distribution
//! library so that their bit patterns do not depend on crate versions:
//!
//! * `below(n)`  = high 64 bits of the 128-bit product `next_u64() * n`
//!   (Lemire widening multiply, no rejection step).
//! * `unit()`    = `(next_u64() >> 11) * 2^-53`, uniform in `[0, 1)`.
//! * `chance(p)` = `unit() < p`.

use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;

#[derive(Clone, Debug)]
pub struct SimRng(Pcg64Mcg);

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng(Pcg64Mcg::seed_from_u64(seed))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `[0, n)`. `n` must be non-zero.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Uniform real in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}
