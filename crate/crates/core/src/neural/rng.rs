use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

pub const RNG_ALGORITHM: &str = "chacha8";

/// Seeded random stream; the same seed always yields the same stream.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    /// Derives an independent stream, e.g. one per epoch.
    pub fn fork(&mut self) -> Rng {
        Rng::new(self.inner.gen())
    }

    pub fn uniform<S: Scalar>(&mut self, lo: f64, hi: f64) -> S {
        S::from_f64_lossy(self.inner.gen_range(lo..hi))
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.inner.gen_bool(p.clamp(0.0, 1.0))
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }
}
