//! Seeded random streams.
//!
//! Every consumer (projection, environment contexts, reward noise, posterior
//! sampling, policy coin flips) draws from its own named stream, so adding
//! draws to one consumer never shifts the sequence seen by another. A stream
//! is a ChaCha12 keystream keyed by `(seed, index)` with the ChaCha stream id
//! derived from the label.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Named stream labels used throughout the crate.
pub mod streams {
    pub const PROJECTION: &str = "projection";
    pub const NOISE: &str = "noise";
    pub const POSTERIOR: &str = "posterior";
    pub const ENVIRONMENT: &str = "environment";
    pub const POLICY: &str = "policy";
    pub const WARMUP: &str = "warmup";
    pub const FACTORIZATION: &str = "factorization";
}

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    stream: String,
    index: u64,
    inner: ChaCha12Rng,
}

fn stream_id(label: &str) -> u64 {
    // FNV-1a, stable across platforms and releases.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Rng {
    pub fn new(seed: u64, stream: &str) -> Self {
        Self::indexed(seed, stream, 0)
    }

    /// A stream keyed additionally by an index, e.g. a round number, so that
    /// draws for index `i` do not depend on how many draws earlier indices made.
    pub fn indexed(seed: u64, stream: &str, index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&index.to_le_bytes());
        let mut inner = ChaCha12Rng::from_seed(key);
        inner.set_stream(stream_id(stream));
        Self {
            seed,
            stream: stream.to_owned(),
            index,
            inner,
        }
    }

    /// Child stream `"{self.stream}/{label}"` with the same seed.
    pub fn substream(&self, label: &str) -> Self {
        Self::indexed(self.seed, &format!("{}/{}", self.stream, label), self.index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> &str {
        &self.stream
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn gaussian(&mut self, mean: f64, std: f64) -> Result<f64> {
        gaussian_draw(self, mean, std)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Draw from `N(mean, std²)`.
pub fn gaussian_draw(rng: &mut Rng, mean: f64, std: f64) -> Result<f64> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::invalid(format!(
            "standard deviation must be finite and non-negative, got {std}"
        )));
    }
    if std == 0.0 {
        return Ok(mean);
    }
    Ok(mean + std * rng.standard_normal())
}
