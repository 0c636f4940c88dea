//! Mini-batch SGD training.
//!
//! Per-sample gradients inside a batch are computed in fixed-size chunks that
//! may run on any worker; chunk sums are then reduced in chunk order, so the
//! result does not depend on the number of threads.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::PatchSample;
use crate::kv::KeyValues;
use crate::nn::{Sgd, SgdState};

use super::network::{Network, NetworkGradients};

const REDUCE_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            epochs: 30,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("batch_size", self.batch_size);
        kv.push("epochs", self.epochs);
        kv.push("learning_rate", self.learning_rate);
        kv.push("momentum", self.momentum);
        kv.push("train_seed", self.seed);
        kv.push("shuffle", self.shuffle);
        kv
    }
}

fn check_samples(network: &Network, samples: &[PatchSample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset("no training samples".into()));
    }
    let cfg = network.config();
    let shape = cfg.input_shape();
    for (i, s) in samples.iter().enumerate() {
        if s.label >= cfg.classes {
            return Err(Error::invalid(format!(
                "sample {i} has label {} but the model has {} classes",
                s.label, cfg.classes
            )));
        }
        if s.data.shape() != shape {
            return Err(Error::shape("train sample", s.data.shape(), &shape));
        }
    }
    Ok(())
}

/// Trains in place, calling `on_epoch(epoch, mean_loss)` after every epoch.
/// Returns the mean training loss of each epoch.
pub fn train_with(
    network: &mut Network,
    samples: &[PatchSample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    config.validate()?;
    check_samples(network, samples)?;
    let sizes: Vec<usize> = network.parameter_slices().iter().map(|s| s.len()).collect();
    let mut optimizer = SgdState::<f32>::new(
        Sgd {
            learning_rate: config.learning_rate,
            momentum: config.momentum,
        },
        &sizes,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut sample_loss = vec![0.0f64; samples.len()];
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(config.batch_size) {
            let net: &Network = network;
            let partials: Vec<(NetworkGradients, Vec<(usize, f64)>)> = batch
                .par_chunks(REDUCE_CHUNK)
                .map(|chunk| {
                    let mut grads = NetworkGradients::zeros_like(net);
                    let mut losses = Vec::with_capacity(chunk.len());
                    for &i in chunk {
                        let s = &samples[i];
                        let loss = net.accumulate_gradients(&s.data, s.label, &mut grads)?;
                        losses.push((i, loss as f64));
                    }
                    Ok((grads, losses))
                })
                .collect::<Result<_>>()?;
            let mut iter = partials.into_iter();
            let (mut total, losses) = iter.next().expect("batch is non-empty");
            for (i, l) in losses {
                sample_loss[i] = l;
            }
            for (g, losses) in iter {
                total.add_assign(&g);
                for (i, l) in losses {
                    sample_loss[i] = l;
                }
            }
            total.scale(1.0 / batch.len() as f32);
            optimizer.step(network.parameter_slices_mut(), total.slices())?;
        }
        let mean = sample_loss.iter().sum::<f64>() / samples.len() as f64;
        if !mean.is_finite() {
            return Err(Error::invalid(format!(
                "training diverged at epoch {epoch} (loss {mean}); lower the learning rate"
            )));
        }
        history.push(mean);
        on_epoch(epoch, mean);
    }
    Ok(history)
}

pub fn train(mut network: Network, samples: &[PatchSample], config: &TrainConfig) -> Result<(Network, Vec<f64>)> {
    let history = train_with(&mut network, samples, config, |_, _| {})?;
    Ok((network, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::tensor::Tensor;

    fn tiny() -> Network {
        let mut c = ModelConfig::new("GrL".parse().unwrap());
        c.patch_size = 8;
        c.filters = [2, 2, 2];
        c.kernel_size = 3;
        c.classes = 2;
        Network::build(c).unwrap()
    }

    /// Class 1 patches are bright on the left half, class 0 on the right.
    fn toy_samples(n: usize) -> Vec<PatchSample> {
        (0..n)
            .map(|i| {
                let label = i % 2;
                let data = Tensor::from_fn(&[8, 8, 2], |k| {
                    let col = (k / 2) % 8;
                    let bright = (col < 4) == (label == 1);
                    if bright {
                        0.9
                    } else {
                        0.1
                    }
                });
                PatchSample {
                    data,
                    label,
                    frame_index: 0,
                    origin: (0, 0),
                }
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_leaves_weights_and_flat_history() {
        let net = tiny();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            batch_size: 3,
            ..TrainConfig::default()
        };
        let (trained, history) = train(net.clone(), &toy_samples(10), &cfg).unwrap();
        assert_eq!(trained, net);
        assert_eq!(history.len(), 3);
        assert!(history.iter().all(|&l| l == history[0]));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let a = train(tiny(), &toy_samples(12), &cfg).unwrap();
        let b = train(tiny(), &toy_samples(12), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loss_decreases_on_separable_toy() {
        let cfg = TrainConfig {
            epochs: 15,
            batch_size: 4,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let (_, history) = train(tiny(), &toy_samples(16), &cfg).unwrap();
        assert!(history.last().unwrap() < &history[0], "{history:?}");
    }

    #[test]
    fn rejects_empty_and_bad_labels() {
        let cfg = TrainConfig::default();
        assert!(matches!(train(tiny(), &[], &cfg), Err(Error::EmptyDataset(_))));
        let mut s = toy_samples(2);
        s[1].label = 5;
        assert!(train(tiny(), &s, &cfg).is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train(tiny(), &toy_samples(2), &bad).is_err());
    }
}
