//! Seeded random source shared by every stochastic step.
//!
//! The stream is ChaCha20 (RFC 8439 block function) keyed by the seed's
//! little-endian bytes in the first eight key bytes, zero nonce, counter
//! starting at 0. Derived draws use fixed formulas so other
//! implementations can reproduce them:
//!
//! * uniform `[0, 1)`: top 53 bits of the next `u64`, times `2^-53`
//! * index below `n`: high 64 bits of `next_u64 * n`
//! * standard normal: Box-Muller, `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`,
//!   one value per pair of uniforms

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct SeededRng(ChaCha20Rng);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Self(ChaCha20Rng::from_seed(key))
    }

    /// Independent stream for a sub-task, keyed by `(seed, stream)`.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut rng = Self::new(seed);
        rng.0.set_stream(stream);
        rng
    }

    pub fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
