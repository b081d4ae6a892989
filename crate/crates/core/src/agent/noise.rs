use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Ornstein-Uhlenbeck exploration process, one independent state per CAV id.
/// A CAV that appears mid-episode starts from the mean.
#[derive(Debug, Clone)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    pub mu: f64,
    pub dt: f64,
    states: BTreeMap<u64, f64>,
    rng: ChaCha8Rng,
}

impl OuNoise {
    pub fn new(theta: f64, sigma: f64, seed: u64) -> Self {
        Self {
            theta,
            sigma,
            mu: 0.0,
            dt: 1.0,
            states: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Clears all per-node states; called at the start of every episode.
    pub fn reset(&mut self) {
        self.states.clear();
    }

    /// `x ← x + θ(μ − x)dt + σ√dt·ε`.
    pub fn next(&mut self, id: u64) -> f64 {
        let eps: f64 = self.rng.sample(StandardNormal);
        let x = self.states.entry(id).or_insert(self.mu);
        *x += self.theta * (self.mu - *x) * self.dt + self.sigma * self.dt.sqrt() * eps;
        *x
    }

    /// One draw per id, in the given order.
    pub fn sample(&mut self, ids: &[u64]) -> Vec<f64> {
        ids.iter().map(|&id| self.next(id)).collect()
    }

    /// `σ/√(2θ)`, the stationary std of the continuous-time process.
    pub fn stationary_std(&self) -> f64 {
        self.sigma / (2.0 * self.theta).sqrt()
    }
}
