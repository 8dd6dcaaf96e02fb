#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Agents holding `s (x + a_i sin(b_i x)) + k_i`; the average is strictly
/// monotone with derivative magnitude in `[1/L, L]`.
pub struct MonotoneInstance {
    pub parts: Vec<(f64, f64, f64)>,
    pub sign: f64,
    pub lipschitz: f64,
}

impl MonotoneInstance {
    pub fn sample(seed: u64, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let parts: Vec<_> = (0..n)
            .map(|_| {
                let b = rng.random_range(0.5..4.0);
                let a = rng.random_range(0.0..0.6) / b;
                (a, b, rng.random_range(-1.0..1.0))
            })
            .collect();
        let spread = parts.iter().map(|(a, b, _)| a * b).sum::<f64>() / n as f64;
        let lipschitz = (1.0 + spread).max(1.0 / (1.0 - spread));
        Self { parts, sign, lipschitz }
    }

    pub fn agent(&self, i: usize) -> impl Fn(f64) -> f64 + Sync + '_ {
        let (a, b, k) = self.parts[i];
        move |x| self.sign * (x + a * (b * x).sin()) + k
    }

    pub fn average(&self, x: f64) -> f64 {
        (0..self.parts.len()).map(|i| self.agent(i)(x)).sum::<f64>() / self.parts.len() as f64
    }

    /// Global minimizer on `[-1, 1]`.
    pub fn argmin(&self) -> f64 {
        -self.sign
    }
}
