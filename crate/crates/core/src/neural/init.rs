use super::rng::Rng;
use super::tensor::Tensor;
use crate::scalar::Scalar;

pub fn zeros<S: Scalar>(shape: &[usize]) -> Tensor<S> {
    Tensor::zeros(shape)
}

pub fn uniform<S: Scalar>(shape: &[usize], bound: f64, rng: &mut Rng) -> Tensor<S> {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.uniform(-bound, bound);
    }
    t
}

/// Xavier-uniform for a `[fan_out, fan_in]` matrix.
pub fn xavier<S: Scalar>(shape: &[usize], rng: &mut Rng) -> Tensor<S> {
    let (fan_out, fan_in) = (shape[0], shape.get(1).copied().unwrap_or(1));
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(shape, bound, rng)
}
