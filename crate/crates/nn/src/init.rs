use rand::Rng;

use crate::tensor::Tensor;

/// Uniform He initialization: `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
pub fn he_uniform<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape/product agree")
}
