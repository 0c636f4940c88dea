//! Fully connected output layer with softmax cross-entropy loss.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T = f32> {
    /// `N×D`, one row per class.
    pub weights: Tensor<T>,
    pub biases: Vec<T>,
}

pub type DenseGradients<T = f32> = DenseParams<T>;

impl<T: Scalar> DenseParams<T> {
    pub fn new(weights: Tensor<T>, biases: Vec<T>) -> Result<Self> {
        weights.expect_rank(2, "DenseParams")?;
        if biases.len() != weights.shape()[0] {
            return Err(Error::shape(
                "DenseParams biases",
                &[weights.shape()[0]],
                &[biases.len()],
            ));
        }
        Ok(Self { weights, biases })
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            weights: Tensor::zeros(other.weights.shape()),
            biases: vec![T::zero(); other.biases.len()],
        }
    }

    pub fn classes(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn input_len(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn cast<U: Scalar>(&self) -> DenseParams<U> {
        DenseParams {
            weights: self.weights.cast(),
            biases: self.biases.iter().map(|&b| U::lit(b.as_f64())).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SoftmaxXent<T = f32> {
    pub probabilities: Vec<T>,
    pub loss: T,
    /// Gradient w.r.t. the flattened input, shaped like the input.
    pub input_grad: Tensor<T>,
    pub grads: DenseGradients<T>,
}

pub fn dense_logits<T: Scalar>(input: &Tensor<T>, params: &DenseParams<T>) -> Result<Vec<T>> {
    if input.len() != params.input_len() {
        return Err(Error::shape("dense", input.shape(), params.weights.shape()));
    }
    let n = params.classes();
    let d = params.input_len();
    let mut logits = params.biases.clone();
    T::gemm(
        n,
        d,
        1,
        T::one(),
        params.weights.data(),
        d,
        1,
        input.data(),
        1,
        1,
        T::one(),
        &mut logits,
        1,
        1,
    );
    Ok(logits)
}

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Cross-entropy of `softmax(logits)` against `label`, returning
/// `(probabilities, loss, d loss / d logits)`.
pub fn softmax_xent<T: Scalar>(logits: &[T], label: usize) -> Result<(Vec<T>, T, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let shifted: Vec<T> = logits.iter().map(|&z| z - max).collect();
    let log_total = shifted.iter().map(|&z| z.exp()).sum::<T>().ln();
    let probs: Vec<T> = shifted.iter().map(|&z| (z - log_total).exp()).collect();
    let loss = log_total - shifted[label];
    let mut dlogits = probs.clone();
    dlogits[label] -= T::one();
    Ok((probs, loss, dlogits))
}

pub fn dense_softmax_xent<T: Scalar>(
    input: &Tensor<T>,
    params: &DenseParams<T>,
    label: usize,
) -> Result<SoftmaxXent<T>> {
    let logits = dense_logits(input, params)?;
    let (probabilities, loss, dlogits) = softmax_xent(&logits, label)?;
    let mut grads = DenseParams::zeros_like(params);
    let input_grad = dense_backward_with(input, params, &dlogits, &mut grads, true).expect("input gradient requested");
    Ok(SoftmaxXent {
        probabilities,
        loss,
        input_grad,
        grads,
    })
}

/// Adds the parameter gradients for `dlogits` into `grads`.
pub(crate) fn dense_backward_with<T: Scalar>(
    input: &Tensor<T>,
    params: &DenseParams<T>,
    dlogits: &[T],
    grads: &mut DenseGradients<T>,
    want_input_grad: bool,
) -> Option<Tensor<T>> {
    let n = params.classes();
    let d = params.input_len();
    // dW[n, d] += dlogits[n, 1] * x[1, d]
    T::gemm(
        n,
        1,
        d,
        T::one(),
        dlogits,
        1,
        1,
        input.data(),
        d,
        1,
        T::one(),
        grads.weights.data_mut(),
        d,
        1,
    );
    for (b, &g) in grads.biases.iter_mut().zip(dlogits) {
        *b += g;
    }
    if !want_input_grad {
        return None;
    }
    let mut dx = vec![T::zero(); d];
    // dx[1, d] = dlogits[1, n] * W[n, d]
    T::gemm(
        1,
        n,
        d,
        T::one(),
        dlogits,
        n,
        1,
        params.weights.data(),
        d,
        1,
        T::zero(),
        &mut dx,
        d,
        1,
    );
    Some(Tensor::new(input.shape().to_vec(), dx).expect("input shape is valid"))
}
