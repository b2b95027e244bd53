//! Seeded weight initialization. Feed-forward kernels get fan-in-scaled
//! uniform draws; recurrent kernels get a small uniform keyed to the hidden
//! width; biases start at zero.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Uniform in ±sqrt(6 / fan_in), the usual scale for conv and dense kernels.
pub fn fan_in_uniform(rng: &mut ChaCha8Rng, fan_in: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..limit)).collect()
}

/// Uniform in ±sqrt(1 / hidden) for recurrent matrices.
pub fn recurrent_uniform(rng: &mut ChaCha8Rng, hidden: usize, n: usize) -> Vec<f64> {
    let limit = (1.0 / hidden as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..limit)).collect()
}
