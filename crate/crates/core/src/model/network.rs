//! Three conv → ReLU → 2×2 max-pool stages followed by a dense softmax layer.

use crate::error::{Error, Result};
use crate::frame::ChannelList;
use crate::kv::KeyValues;
use crate::nn::{
    conv2d_backward_with, conv2d_forward_with, dense_backward_with, dense_logits, init_he, maxpool2x2_backward,
    maxpool2x2_forward, relu_backward_in_place, relu_in_place, softmax, softmax_xent, ConvGradients, ConvLayerParams,
    DenseGradients, DenseParams, PoolIndices,
};
use crate::tensor::{Scalar, Tensor};

pub const STAGES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub patch_size: usize,
    pub channels: ChannelList,
    pub filters: [usize; STAGES],
    pub kernel_size: usize,
    pub classes: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(channels: ChannelList) -> Self {
        Self {
            patch_size: 32,
            channels,
            filters: [32, 32, 64],
            kernel_size: 5,
            classes: 9,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || !self.patch_size.is_multiple_of(8) {
            return Err(Error::invalid(format!(
                "patch size {} must be a positive multiple of 8 for three 2×2 poolings",
                self.patch_size
            )));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::invalid(format!("kernel size {} must be odd", self.kernel_size)));
        }
        if self.filters.contains(&0) {
            return Err(Error::invalid(format!(
                "filter counts must be positive, got {:?}",
                self.filters
            )));
        }
        if self.classes < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {}", self.classes)));
        }
        Ok(())
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [self.patch_size, self.patch_size, self.channels.len()]
    }

    pub fn dense_inputs(&self) -> usize {
        let s = self.patch_size / 8;
        s * s * self.filters[STAGES - 1]
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("patch_size", self.patch_size);
        kv.push("channels", &self.channels);
        kv.push(
            "filters",
            self.filters.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(","),
        );
        kv.push("kernel_size", self.kernel_size);
        kv.push("classes", self.classes);
        kv.push("seed", self.seed);
        kv
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let cfg = Self {
            patch_size: kv.parse_as("patch_size")?,
            channels: kv.parse_as("channels")?,
            filters: parse_filters(kv.require("filters")?)?,
            kernel_size: kv.parse_as("kernel_size")?,
            classes: kv.parse_as("classes")?,
            seed: kv.parse_as("seed")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `32,32,64`.
pub fn parse_filters(s: &str) -> Result<[usize; STAGES]> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("bad filter list {s:?}: {e}")))?;
    v.try_into()
        .map_err(|v: Vec<usize>| Error::Parse(format!("expected {STAGES} filter counts, got {}", v.len())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T = f32> {
    config: ModelConfig,
    convs: Vec<ConvLayerParams<T>>,
    dense: DenseParams<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGradients<T = f32> {
    pub convs: Vec<ConvGradients<T>>,
    pub dense: DenseGradients<T>,
}

impl<T: Scalar> NetworkGradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Self {
            convs: net.convs.iter().map(ConvGradients::zeros_like).collect(),
            dense: DenseParams::zeros_like(&net.dense),
        }
    }

    /// Flat views in the same order as [`Network::parameter_slices`].
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(2 * STAGES + 2);
        for g in &self.convs {
            out.push(g.kernels.data());
            out.push(g.biases.as_slice());
        }
        out.push(self.dense.weights.data());
        out.push(self.dense.biases.as_slice());
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(2 * STAGES + 2);
        for g in &mut self.convs {
            out.push(g.kernels.data_mut());
            out.push(g.biases.as_mut_slice());
        }
        out.push(self.dense.weights.data_mut());
        out.push(self.dense.biases.as_mut_slice());
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for s in self.slices_mut() {
            for x in s {
                *x *= factor;
            }
        }
    }
}

struct StageTrace<T> {
    input: Tensor<T>,
    cols: Vec<T>,
    activation: Tensor<T>,
    pool: PoolIndices,
}

struct Trace<T> {
    stages: Vec<StageTrace<T>>,
    flat: Tensor<T>,
    logits: Vec<T>,
}

impl Network<f32> {
    /// Fresh network with He-initialized weights and zero biases.
    pub fn build(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let k = config.kernel_size;
        let mut convs = Vec::with_capacity(STAGES);
        let mut cin = config.channels.len();
        for (i, &cout) in config.filters.iter().enumerate() {
            let kernels = init_he(&[cout, k, k, cin], layer_seed(config.seed, i));
            convs.push(ConvLayerParams::same(kernels)?);
            cin = cout;
        }
        let weights = init_he(
            &[config.classes, config.dense_inputs()],
            layer_seed(config.seed, STAGES),
        );
        let dense = DenseParams::new(weights, vec![0.0; config.classes])?;
        Ok(Self { config, convs, dense })
    }
}

fn layer_seed(seed: u64, layer: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(layer as u64 + 1)
}

impl<T: Scalar> Network<T> {
    pub fn from_parts(config: ModelConfig, convs: Vec<ConvLayerParams<T>>, dense: DenseParams<T>) -> Result<Self> {
        config.validate()?;
        if convs.len() != STAGES {
            return Err(Error::invalid(format!(
                "expected {STAGES} conv layers, got {}",
                convs.len()
            )));
        }
        let k = config.kernel_size;
        let mut cin = config.channels.len();
        for (layer, &cout) in convs.iter().zip(&config.filters) {
            let expected = [cout, k, k, cin];
            if layer.kernels.shape() != expected || layer.stride != 1 || layer.padding != (k - 1) / 2 {
                return Err(Error::shape("Network conv layer", layer.kernels.shape(), &expected));
            }
            cin = cout;
        }
        let expected = [config.classes, config.dense_inputs()];
        if dense.weights.shape() != expected {
            return Err(Error::shape("Network dense layer", dense.weights.shape(), &expected));
        }
        Ok(Self { config, convs, dense })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn convs(&self) -> &[ConvLayerParams<T>] {
        &self.convs
    }

    pub fn dense(&self) -> &DenseParams<T> {
        &self.dense
    }

    pub fn dense_mut(&mut self) -> &mut DenseParams<T> {
        &mut self.dense
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            convs: self.convs.iter().map(|c| c.cast()).collect(),
            dense: self.dense.cast(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_slices().iter().map(|s| s.len()).sum()
    }

    /// Kernels and biases of each conv stage, then dense weights and biases.
    pub fn parameter_slices(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(2 * STAGES + 2);
        for c in &self.convs {
            out.push(c.kernels.data());
            out.push(c.biases.as_slice());
        }
        out.push(self.dense.weights.data());
        out.push(self.dense.biases.as_slice());
        out
    }

    pub fn parameter_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(2 * STAGES + 2);
        for c in &mut self.convs {
            out.push(c.kernels.data_mut());
            out.push(c.biases.as_mut_slice());
        }
        out.push(self.dense.weights.data_mut());
        out.push(self.dense.biases.as_mut_slice());
        out
    }

    fn check_input(&self, patch: &Tensor<T>) -> Result<()> {
        let expected = self.config.input_shape();
        if patch.shape() != expected {
            return Err(Error::shape("Network input", patch.shape(), &expected));
        }
        Ok(())
    }

    fn trace(&self, patch: &Tensor<T>) -> Result<Trace<T>> {
        self.check_input(patch)?;
        let mut stages = Vec::with_capacity(STAGES);
        let mut x = patch.clone();
        for conv in &self.convs {
            let mut cols = Vec::new();
            let mut activation = conv2d_forward_with(&x, conv, &mut cols)?;
            relu_in_place(&mut activation);
            let (pooled, pool) = maxpool2x2_forward(&activation)?;
            stages.push(StageTrace {
                input: x,
                cols,
                activation,
                pool,
            });
            x = pooled;
        }
        let n = x.len();
        let flat = x.reshape(&[n])?;
        let logits = dense_logits(&flat, &self.dense)?;
        Ok(Trace { stages, flat, logits })
    }

    pub fn logits(&self, patch: &Tensor<T>) -> Result<Vec<T>> {
        Ok(self.trace(patch)?.logits)
    }

    pub fn probabilities(&self, patch: &Tensor<T>) -> Result<Vec<T>> {
        Ok(softmax(&self.logits(patch)?))
    }

    /// Shapes of every intermediate activation of a real forward pass, from
    /// the input through each conv and pool to the logits.
    pub fn activation_shapes(&self, patch: &Tensor<T>) -> Result<Vec<Vec<usize>>> {
        let trace = self.trace(patch)?;
        let mut shapes = vec![patch.shape().to_vec()];
        for (i, st) in trace.stages.iter().enumerate() {
            shapes.push(st.activation.shape().to_vec());
            let pooled = match trace.stages.get(i + 1) {
                Some(next) => next.input.shape().to_vec(),
                None => {
                    let s = st.pool.input_shape();
                    vec![s[0] / 2, s[1] / 2, s[2]]
                }
            };
            shapes.push(pooled);
        }
        shapes.push(vec![trace.logits.len()]);
        Ok(shapes)
    }

    /// Cross-entropy loss of one sample; parameter gradients are added into
    /// `grads`.
    pub fn accumulate_gradients(&self, patch: &Tensor<T>, label: usize, grads: &mut NetworkGradients<T>) -> Result<T> {
        if label >= self.config.classes {
            return Err(Error::invalid(format!(
                "label {label} out of range for {} classes",
                self.config.classes
            )));
        }
        let trace = self.trace(patch)?;
        let (_, loss, dlogits) = softmax_xent(&trace.logits, label)?;
        let mut upstream = dense_backward_with(&trace.flat, &self.dense, &dlogits, &mut grads.dense, true)
            .expect("input gradient requested");
        for (i, st) in trace.stages.iter().enumerate().rev() {
            let s = st.pool.input_shape();
            let up = upstream.reshape(&[s[0] / 2, s[1] / 2, s[2]])?;
            let mut dact = maxpool2x2_backward(&st.pool, &up)?;
            relu_backward_in_place(&st.activation, &mut dact);
            match conv2d_backward_with(&st.input, &self.convs[i], &dact, &st.cols, &mut grads.convs[i], i > 0)? {
                Some(dx) => upstream = dx,
                None => break,
            }
        }
        Ok(loss)
    }

    /// Mean loss and gradients over a set of samples, for gradient checking.
    pub fn loss_and_gradients(&self, samples: &[(Tensor<T>, usize)]) -> Result<(T, NetworkGradients<T>)> {
        let mut grads = NetworkGradients::zeros_like(self);
        let mut total = T::zero();
        for (x, y) in samples {
            total += self.accumulate_gradients(x, *y, &mut grads)?;
        }
        let inv = T::one() / T::lit(samples.len().max(1) as f64);
        grads.scale(inv);
        Ok((total * inv, grads))
    }

    pub fn loss(&self, samples: &[(Tensor<T>, usize)]) -> Result<T> {
        let mut total = T::zero();
        for (x, y) in samples {
            let (_, loss, _) = softmax_xent(&self.logits(x)?, *y)?;
            total += loss;
        }
        Ok(total / T::lit(samples.len().max(1) as f64))
    }
}

/// Argmax class with ties broken toward the lowest id, plus the softmax
/// probabilities.
pub fn predict_patch<T: Scalar>(network: &Network<T>, patch: &Tensor<T>) -> Result<(usize, Vec<T>)> {
    let probs = network.probabilities(patch)?;
    Ok((argmax(&probs), probs))
}

pub(crate) fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(channels: &str) -> ModelConfig {
        ModelConfig::new(channels.parse().unwrap())
    }

    #[test]
    fn default_forward_gives_nine_probabilities() {
        let net = Network::build(cfg("RGBLUV")).unwrap();
        let x = Tensor::from_fn(&[32, 32, 6], |i| ((i * 31) % 17) as f32 / 16.0);
        let (class, p) = predict_patch(&net, &x).unwrap();
        assert_eq!(p.len(), 9);
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        assert!(class < 9);
        assert_eq!(predict_patch(&net, &x).unwrap().0, class);
    }

    #[test]
    fn second_stage_input_is_16x16x32() {
        let net = Network::build(cfg("GrLUV")).unwrap();
        assert_eq!(net.convs()[0].kernels.shape(), &[32, 5, 5, 4]);
        let shapes = net.activation_shapes(&Tensor::zeros(&[32, 32, 4])).unwrap();
        assert_eq!(shapes[2], vec![16, 16, 32]);
    }

    #[test]
    fn rejects_patch_not_divisible_by_eight() {
        let mut c = cfg("GrLUV");
        c.patch_size = 20;
        assert!(Network::build(c).is_err());
    }

    #[test]
    fn rejects_wrong_input_shape() {
        let net = Network::build(cfg("GrLUV")).unwrap();
        assert!(net.logits(&Tensor::zeros(&[32, 32, 6])).is_err());
    }

    #[test]
    fn hand_set_dense_bias_selects_class() {
        let mut net = Network::build(cfg("GrLUV")).unwrap();
        let dense = net.dense_mut();
        dense.weights.data_mut().fill(0.0);
        dense.biases[3] = 5.0;
        let (class, _) = predict_patch(&net, &Tensor::filled(&[32, 32, 4], 0.5)).unwrap();
        assert_eq!(class, 3);
    }

    #[test]
    fn argmax_prefers_lowest_on_ties() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[1, 1, 1]), 0);
    }

    #[test]
    fn config_round_trips_through_text() {
        let mut c = cfg("GrLUV");
        c.kernel_size = 9;
        c.seed = 77;
        let back = ModelConfig::from_key_values(&c.to_key_values().to_text().parse().unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(parse_filters("32,32").is_err());
    }
}
