use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| if x > T::zero() { x } else { T::zero() })
}

pub(crate) fn relu_in_place<T: Scalar>(x: &mut Tensor<T>) {
    for v in x.data_mut() {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
}

/// Gradient passes only where the input is strictly positive.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != upstream.shape() {
        return Err(Error::shape("relu_backward", input.shape(), upstream.shape()));
    }
    let mut grad = upstream.clone();
    relu_backward_in_place(input, &mut grad);
    Ok(grad)
}

/// Masks `grad` by the sign of `activation`, which may be either the ReLU
/// input or its output since both are positive at the same positions.
pub(crate) fn relu_backward_in_place<T: Scalar>(activation: &Tensor<T>, grad: &mut Tensor<T>) {
    for (g, &a) in grad.data_mut().iter_mut().zip(activation.data()) {
        if !(a > T::zero()) {
            *g = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_negatives() {
        let x = Tensor::new(vec![3], vec![-1.0f32, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn gradient_is_strict_at_zero() {
        let x = Tensor::new(vec![3], vec![-1.0f64, 0.0, 2.0]).unwrap();
        let up = Tensor::new(vec![3], vec![5.0, 5.0, 5.0]).unwrap();
        assert_eq!(relu_backward(&x, &up).unwrap().data(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn positive_and_negative_parts_sum_to_abs() {
        let x = Tensor::<f64>::from_fn(&[7, 3], |i| ((i * 7919) % 23) as f64 - 11.5);
        let pos = relu(&x);
        let neg = relu(&x.map(|v| -v));
        for ((&a, &b), &v) in pos.data().iter().zip(neg.data()).zip(x.data()) {
            assert_eq!(a + b, v.abs());
        }
    }
}
