//! Weight initialization.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

/// Kaiming-uniform initialization for ReLU networks: U(-b, b) with
/// b = sqrt(6 / fan_in). Biases are zero-initialized by the caller.
pub fn kaiming_uniform(shape: Vec<usize>, fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<f32> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| (rng.random::<f64>() * 2.0 * bound - bound) as f32)
        .collect();
    Tensor::new(shape, data).expect("shape/data length agree by construction")
}
