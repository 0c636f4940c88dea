//! 2×2 max pooling with stride 2.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Winner positions recorded by the forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    input_shape: Vec<usize>,
    /// Flat input offset of the max for each output element.
    argmax: Vec<usize>,
}

impl PoolIndices {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// Ties go to the first element in row-major window order.
pub fn maxpool2x2_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
    input.expect_rank(3, "maxpool2x2")?;
    let [h, w, c] = [input.shape()[0], input.shape()[1], input.shape()[2]];
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid(format!(
            "maxpool2x2 needs even spatial dims, got {h}×{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            let base = [
                ((2 * oy) * w + 2 * ox) * c,
                ((2 * oy) * w + 2 * ox + 1) * c,
                ((2 * oy + 1) * w + 2 * ox) * c,
                ((2 * oy + 1) * w + 2 * ox + 1) * c,
            ];
            for ch in 0..c {
                let mut best = base[0] + ch;
                for &b in &base[1..] {
                    if x[b + ch] > x[best] {
                        best = b + ch;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::new(vec![oh, ow, c], out)?,
        PoolIndices {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool2x2_backward<T: Scalar>(indices: &PoolIndices, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    let s = &indices.input_shape;
    let expected = [s[0] / 2, s[1] / 2, s[2]];
    if upstream.shape() != expected {
        return Err(Error::shape("maxpool2x2_backward", upstream.shape(), &expected));
    }
    let mut grad = Tensor::zeros(s);
    let g = grad.data_mut();
    for (&idx, &u) in indices.argmax.iter().zip(upstream.data()) {
        g[idx] += u;
    }
    Ok(grad)
}
