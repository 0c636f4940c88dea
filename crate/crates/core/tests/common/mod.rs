//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use mmreg::nn::ConvLayerParams;
use mmreg::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Six nested loops, zero padding.
pub fn naive_conv(input: &Tensor<f64>, p: &ConvLayerParams<f64>) -> Tensor<f64> {
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (kn, k) = (p.kernels.shape()[0], p.kernels.shape()[1]);
    let (s, pad) = (p.stride as isize, p.padding as isize);
    let oh = (h + 2 * p.padding - k) / p.stride + 1;
    let ow = (w + 2 * p.padding - k) / p.stride + 1;
    let x = input.data();
    let wt = p.kernels.data();
    let mut out = vec![0.0; oh * ow * kn];
    for oy in 0..oh {
        for ox in 0..ow {
            for f in 0..kn {
                let mut acc = p.biases[f];
                for ky in 0..k {
                    for kx in 0..k {
                        let iy = oy as isize * s + ky as isize - pad;
                        let ix = ox as isize * s + kx as isize - pad;
                        if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                            continue;
                        }
                        for ch in 0..c {
                            acc += x[(iy as usize * w + ix as usize) * c + ch] * wt[((f * k + ky) * k + kx) * c + ch];
                        }
                    }
                }
                out[(oy * ow + ox) * kn + f] = acc;
            }
        }
    }
    Tensor::new(vec![oh, ow, kn], out).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Values in `±[0.05, 1]`, all distinct, so ReLU and max-pool kinks stay
/// far from the finite-difference step.
pub fn kink_free_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|i| {
            let mag = 0.05 + 0.9 * (i as f64 + rng.random_range(0.1..0.9)) / n as f64;
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

pub const FD_STEP: f64 = 1e-6;

/// Central difference of `f` with respect to every element of `x`.
pub fn numeric_gradient(x: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + FD_STEP;
            let up = f(x);
            x[i] = orig - FD_STEP;
            let down = f(x);
            x[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `|a − n| / max(|a|, |n|)`, with the denominator floored at 1e-7.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-7))
        .fold(0.0, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub mod gradcheck {
    use super::*;
    use mmreg::frame::ChannelList;
    use mmreg::model::{ModelConfig, Network, NetworkGradients};
    use mmreg::nn::{
        conv2d_backward, conv2d_forward, dense_softmax_xent, maxpool2x2_backward, maxpool2x2_forward, relu,
        relu_backward, DenseParams,
    };

    fn conv_params(
        rng: &mut ChaCha8Rng,
        kn: usize,
        k: usize,
        c: usize,
        stride: usize,
        pad: usize,
    ) -> ConvLayerParams<f64> {
        let kernels = random_tensor(rng, &[kn, k, k, c]);
        let biases = (0..kn).map(|_| rng.random_range(-0.5..0.5)).collect();
        ConvLayerParams::new(kernels, biases, stride, pad).unwrap()
    }

    /// Worst relative error over input, kernel and bias gradients of
    /// `sum(conv(x) ⊙ r)`.
    pub fn conv(seed: u64, hwc: [usize; 3], kn: usize, k: usize, stride: usize, pad: usize) -> f64 {
        let mut rng = rng(seed);
        let x = random_tensor(&mut rng, &hwc);
        let p = conv_params(&mut rng, kn, k, hwc[2], stride, pad);
        let out_shape = conv2d_forward(&x, &p).unwrap().shape().to_vec();
        let r = random_tensor(&mut rng, &out_shape);
        let (dx, grads) = conv2d_backward(&x, &p, &r).unwrap();

        let mut xv = x.data().to_vec();
        let nx = numeric_gradient(&mut xv, |xv| {
            let t = Tensor::new(hwc.to_vec(), xv.to_vec()).unwrap();
            dot(conv2d_forward(&t, &p).unwrap().data(), r.data())
        });
        let mut wv = p.kernels.data().to_vec();
        let nw = numeric_gradient(&mut wv, |wv| {
            let mut q = p.clone();
            q.kernels = Tensor::new(p.kernels.shape().to_vec(), wv.to_vec()).unwrap();
            dot(conv2d_forward(&x, &q).unwrap().data(), r.data())
        });
        let mut bv = p.biases.clone();
        let nb = numeric_gradient(&mut bv, |bv| {
            let mut q = p.clone();
            q.biases = bv.to_vec();
            dot(conv2d_forward(&x, &q).unwrap().data(), r.data())
        });
        max_relative_error(dx.data(), &nx)
            .max(max_relative_error(grads.kernels.data(), &nw))
            .max(max_relative_error(&grads.biases, &nb))
    }

    pub fn maxpool(seed: u64, hwc: [usize; 3]) -> f64 {
        let mut rng = rng(seed);
        let x = kink_free_tensor(&mut rng, &hwc);
        let (out, idx) = maxpool2x2_forward(&x).unwrap();
        let r = random_tensor(&mut rng, out.shape());
        let dx = maxpool2x2_backward(&idx, &r).unwrap();
        let mut xv = x.data().to_vec();
        let nx = numeric_gradient(&mut xv, |xv| {
            let t = Tensor::new(hwc.to_vec(), xv.to_vec()).unwrap();
            dot(maxpool2x2_forward(&t).unwrap().0.data(), r.data())
        });
        max_relative_error(dx.data(), &nx)
    }

    pub fn relu_layer(seed: u64, hwc: [usize; 3]) -> f64 {
        let mut rng = rng(seed);
        let x = kink_free_tensor(&mut rng, &hwc);
        let r = random_tensor(&mut rng, &hwc);
        let dx = relu_backward(&x, &r).unwrap();
        let mut xv = x.data().to_vec();
        let nx = numeric_gradient(&mut xv, |xv| {
            let t = Tensor::new(hwc.to_vec(), xv.to_vec()).unwrap();
            dot(relu(&t).data(), r.data())
        });
        max_relative_error(dx.data(), &nx)
    }

    /// Dense layer plus softmax cross-entropy.
    pub fn dense(seed: u64, inputs: usize, classes: usize) -> f64 {
        let mut rng = rng(seed);
        let x = random_tensor(&mut rng, &[inputs]);
        let p = DenseParams::new(
            random_tensor(&mut rng, &[classes, inputs]),
            (0..classes).map(|_| rng.random_range(-0.5..0.5)).collect(),
        )
        .unwrap();
        let label = rng.random_range(0..classes);
        let out = dense_softmax_xent(&x, &p, label).unwrap();
        let loss = |x: &Tensor<f64>, p: &DenseParams<f64>| dense_softmax_xent(x, p, label).unwrap().loss;

        let mut xv = x.data().to_vec();
        let nx = numeric_gradient(&mut xv, |xv| loss(&Tensor::new(vec![inputs], xv.to_vec()).unwrap(), &p));
        let mut wv = p.weights.data().to_vec();
        let nw = numeric_gradient(&mut wv, |wv| {
            let mut q = p.clone();
            q.weights = Tensor::new(vec![classes, inputs], wv.to_vec()).unwrap();
            loss(&x, &q)
        });
        let mut bv = p.biases.clone();
        let nb = numeric_gradient(&mut bv, |bv| {
            let mut q = p.clone();
            q.biases = bv.to_vec();
            loss(&x, &q)
        });
        max_relative_error(out.input_grad.data(), &nx)
            .max(max_relative_error(out.grads.weights.data(), &nw))
            .max(max_relative_error(&out.grads.biases, &nb))
    }

    /// Whole network: p=8, filters 2,2,2, three classes, two samples.
    pub fn tiny_network(seed: u64, kernel_size: usize) -> f64 {
        let channels: ChannelList = "GrLUV".parse().unwrap();
        let cfg = ModelConfig {
            patch_size: 8,
            channels,
            filters: [2, 2, 2],
            kernel_size,
            classes: 3,
            seed,
        };
        let mut net = Network::<f32>::build(cfg).unwrap().cast::<f64>();
        let mut rng = rng(seed + 1);
        let samples: Vec<(Tensor<f64>, usize)> = (0..2).map(|i| (random_tensor(&mut rng, &[8, 8, 4]), i % 3)).collect();
        let (_, grads): (f64, NetworkGradients<f64>) = net.loss_and_gradients(&samples).unwrap();
        let analytic: Vec<f64> = grads.slices().concat();

        let sizes: Vec<usize> = net.parameter_slices().iter().map(|s| s.len()).collect();
        let mut numeric = Vec::with_capacity(analytic.len());
        for (blob, &len) in sizes.iter().enumerate() {
            for i in 0..len {
                let orig = net.parameter_slices()[blob][i];
                net.parameter_slices_mut()[blob][i] = orig + FD_STEP;
                let up = net.loss(&samples).unwrap();
                net.parameter_slices_mut()[blob][i] = orig - FD_STEP;
                let down = net.loss(&samples).unwrap();
                net.parameter_slices_mut()[blob][i] = orig;
                numeric.push((up - down) / (2.0 * FD_STEP));
            }
        }
        max_relative_error(&analytic, &numeric)
    }
}
