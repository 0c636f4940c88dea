//! 2-D cross-correlation over `H×W×C` tensors with `K×k×k×C` kernels.
//!
//! The forward and backward passes lower each receptive field to a row of a
//! column matrix and hand the contraction to GEMM.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams<T = f32> {
    /// `K×k×k×Cin`.
    pub kernels: Tensor<T>,
    pub biases: Vec<T>,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGradients<T = f32> {
    pub kernels: Tensor<T>,
    pub biases: Vec<T>,
}

impl<T: Scalar> ConvGradients<T> {
    pub fn zeros_like(params: &ConvLayerParams<T>) -> Self {
        Self {
            kernels: Tensor::zeros(params.kernels.shape()),
            biases: vec![T::zero(); params.biases.len()],
        }
    }
}

impl<T: Scalar> ConvLayerParams<T> {
    pub fn new(kernels: Tensor<T>, biases: Vec<T>, stride: usize, padding: usize) -> Result<Self> {
        kernels.expect_rank(4, "ConvLayerParams")?;
        let s = kernels.shape();
        if s[1] != s[2] {
            return Err(Error::invalid(format!("kernels must be square, got {s:?}")));
        }
        if s[1].is_multiple_of(2) {
            return Err(Error::invalid(format!("kernel size must be odd, got {}", s[1])));
        }
        if biases.len() != s[0] {
            return Err(Error::shape("ConvLayerParams biases", &[s[0]], &[biases.len()]));
        }
        if stride == 0 {
            return Err(Error::invalid("stride must be positive"));
        }
        Ok(Self {
            kernels,
            biases,
            stride,
            padding,
        })
    }

    /// Zero biases, stride 1, padding `(k-1)/2`.
    pub fn same(kernels: Tensor<T>) -> Result<Self> {
        let k = kernels.shape().get(1).copied().unwrap_or(1);
        let count = kernels.shape().first().copied().unwrap_or(0);
        Self::new(kernels, vec![T::zero(); count], 1, k.saturating_sub(1) / 2)
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[3]
    }

    pub fn cast<U: Scalar>(&self) -> ConvLayerParams<U> {
        ConvLayerParams {
            kernels: self.kernels.cast(),
            biases: self.biases.iter().map(|&b| U::lit(b.as_f64())).collect(),
            stride: self.stride,
            padding: self.padding,
        }
    }
}

/// Output size of one spatial axis; the window grid must tile exactly.
pub fn conv_output_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = input + 2 * padding;
    if padded < kernel {
        return Err(Error::invalid(format!(
            "input extent {input} with padding {padding} is smaller than kernel {kernel}"
        )));
    }
    let span = padded - kernel;
    if !span.is_multiple_of(stride) {
        return Err(Error::invalid(format!(
            "non-integral output size: ({input} + 2*{padding} - {kernel}) / {stride}"
        )));
    }
    Ok(span / stride + 1)
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    h: usize,
    w: usize,
    cin: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    cout: usize,
}

impl Geometry {
    fn new<T: Scalar>(input: &Tensor<T>, params: &ConvLayerParams<T>) -> Result<Self> {
        input.expect_rank(3, "conv2d")?;
        let [h, w, cin] = [input.shape()[0], input.shape()[1], input.shape()[2]];
        if cin != params.in_channels() {
            return Err(Error::shape("conv2d", input.shape(), params.kernels.shape()));
        }
        let k = params.kernel_size();
        let oh = conv_output_dim(h, k, params.stride, params.padding)?;
        let ow = conv_output_dim(w, k, params.stride, params.padding)?;
        Ok(Self {
            h,
            w,
            cin,
            k,
            stride: params.stride,
            pad: params.padding,
            oh,
            ow,
            cout: params.out_channels(),
        })
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    fn patch_len(&self) -> usize {
        self.k * self.k * self.cin
    }

    /// Calls `f(col_offset, input_offset)` for every in-bounds kernel tap of
    /// output position `(oy, ox)`; each tap covers `cin` contiguous values.
    #[inline]
    fn for_each_tap(&self, oy: usize, ox: usize, mut f: impl FnMut(usize, usize)) {
        for ky in 0..self.k {
            let iy = (oy * self.stride + ky) as isize - self.pad as isize;
            if iy < 0 || iy >= self.h as isize {
                continue;
            }
            for kx in 0..self.k {
                let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                if ix < 0 || ix >= self.w as isize {
                    continue;
                }
                let col = (ky * self.k + kx) * self.cin;
                let src = (iy as usize * self.w + ix as usize) * self.cin;
                f(col, src);
            }
        }
    }
}

fn im2col<T: Scalar>(input: &[T], g: &Geometry, cols: &mut Vec<T>) {
    let plen = g.patch_len();
    cols.clear();
    cols.resize(g.positions() * plen, T::zero());
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let row = &mut cols[(oy * g.ow + ox) * plen..][..plen];
            g.for_each_tap(oy, ox, |col, src| {
                row[col..col + g.cin].copy_from_slice(&input[src..src + g.cin]);
            });
        }
    }
}

fn col2im<T: Scalar>(dcols: &[T], g: &Geometry, out: &mut [T]) {
    let plen = g.patch_len();
    for oy in 0..g.oh {
        for ox in 0..g.ow {
            let row = &dcols[(oy * g.ow + ox) * plen..][..plen];
            g.for_each_tap(oy, ox, |col, dst| {
                for (o, &d) in out[dst..dst + g.cin].iter_mut().zip(&row[col..col + g.cin]) {
                    *o += d;
                }
            });
        }
    }
}

pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, params: &ConvLayerParams<T>) -> Result<Tensor<T>> {
    let mut cols = Vec::new();
    conv2d_forward_with(input, params, &mut cols)
}

/// Forward pass reusing `cols` as the lowering buffer. On return `cols` holds
/// the lowered input, which `conv2d_backward_with` can consume.
pub(crate) fn conv2d_forward_with<T: Scalar>(
    input: &Tensor<T>,
    params: &ConvLayerParams<T>,
    cols: &mut Vec<T>,
) -> Result<Tensor<T>> {
    let g = Geometry::new(input, params)?;
    im2col(input.data(), &g, cols);
    let npos = g.positions();
    let plen = g.patch_len();
    let mut out = Vec::with_capacity(npos * g.cout);
    for _ in 0..npos {
        out.extend_from_slice(&params.biases);
    }
    T::gemm(
        npos,
        plen,
        g.cout,
        T::one(),
        cols,
        plen,
        1,
        params.kernels.data(),
        1,
        plen,
        T::one(),
        &mut out,
        g.cout,
        1,
    );
    Tensor::new(vec![g.oh, g.ow, g.cout], out)
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    params: &ConvLayerParams<T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, ConvGradients<T>)> {
    let g = Geometry::new(input, params)?;
    let mut cols = Vec::new();
    im2col(input.data(), &g, &mut cols);
    let mut grads = ConvGradients::zeros_like(params);
    let input_grad = conv2d_backward_with(input, params, upstream, &cols, &mut grads, true)?;
    Ok((input_grad.expect("input gradient requested"), grads))
}

/// Backward pass that adds parameter gradients into `grads`. `cols` must be
/// the lowering of `input` left by the forward pass. The input gradient is
/// skipped when `want_input_grad` is false (first layer).
pub(crate) fn conv2d_backward_with<T: Scalar>(
    input: &Tensor<T>,
    params: &ConvLayerParams<T>,
    upstream: &Tensor<T>,
    cols: &[T],
    grads: &mut ConvGradients<T>,
    want_input_grad: bool,
) -> Result<Option<Tensor<T>>> {
    let g = Geometry::new(input, params)?;
    let expected = [g.oh, g.ow, g.cout];
    if upstream.shape() != expected {
        return Err(Error::shape("conv2d_backward upstream", upstream.shape(), &expected));
    }
    if grads.kernels.shape() != params.kernels.shape() || grads.biases.len() != g.cout {
        return Err(Error::shape(
            "conv2d_backward gradients",
            grads.kernels.shape(),
            params.kernels.shape(),
        ));
    }
    let npos = g.positions();
    let plen = g.patch_len();
    debug_assert_eq!(cols.len(), npos * plen);
    let up = upstream.data();

    // dW[K, plen] += up^T[K, npos] * cols[npos, plen]
    T::gemm(
        g.cout,
        npos,
        plen,
        T::one(),
        up,
        1,
        g.cout,
        cols,
        plen,
        1,
        T::one(),
        grads.kernels.data_mut(),
        plen,
        1,
    );
    for row in up.chunks_exact(g.cout) {
        for (b, &u) in grads.biases.iter_mut().zip(row) {
            *b += u;
        }
    }

    if !want_input_grad {
        return Ok(None);
    }
    // dcols[npos, plen] = up[npos, K] * W[K, plen]
    let mut dcols = vec![T::zero(); npos * plen];
    T::gemm(
        npos,
        g.cout,
        plen,
        T::one(),
        up,
        g.cout,
        1,
        params.kernels.data(),
        plen,
        1,
        T::zero(),
        &mut dcols,
        plen,
        1,
    );
    let mut dx = vec![T::zero(); g.h * g.w * g.cin];
    col2im(&dcols, &g, &mut dx);
    Ok(Some(Tensor::new(vec![g.h, g.w, g.cin], dx)?))
}
