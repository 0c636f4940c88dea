use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{Scalar, Tensor};

/// He-Gaussian initialization: zero mean, variance `2 / fan_in`, where
/// `fan_in` is the product of all but the leading (output) dimension.
pub fn init_he<T: Scalar>(shape: &[usize], seed: u64) -> Tensor<T> {
    let fan_in: usize = shape.iter().skip(1).product::<usize>().max(1);
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite positive std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| T::lit(normal.sample(&mut rng)))
}
