//! Mini-batch SGD with classical momentum.

use crate::error::{Error, Result};
use crate::tensor::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
}

/// `v ← m·v + g; w ← w − η·v`. With `m = 0` this is plain `w ← w − η·g`.
pub fn sgd_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    velocity: &mut [T],
    learning_rate: T,
    momentum: T,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(Error::shape(
            "sgd_step",
            &[params.len()],
            &[grads.len(), velocity.len()],
        ));
    }
    for ((w, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *w -= learning_rate * *v;
    }
    Ok(())
}

/// Velocity buffers for a fixed list of parameter slices.
#[derive(Debug, Clone)]
pub struct SgdState<T = f32> {
    config: Sgd,
    velocity: Vec<Vec<T>>,
}

impl<T: Scalar> SgdState<T> {
    pub fn new(config: Sgd, sizes: &[usize]) -> Self {
        Self {
            config,
            velocity: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut [T]>, grads: Vec<&[T]>) -> Result<()> {
        if params.len() != self.velocity.len() || grads.len() != self.velocity.len() {
            return Err(Error::invalid(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.velocity.len(),
                params.len(),
                grads.len()
            )));
        }
        let lr = T::lit(self.config.learning_rate);
        let m = T::lit(self.config.momentum);
        for ((p, g), v) in params.into_iter().zip(grads).zip(&mut self.velocity) {
            sgd_step(p, g, v, lr, m)?;
        }
        Ok(())
    }
}
