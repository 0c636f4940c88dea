//! End-to-end synthetic experiment: render train and test sequences, derive
//! grayscale and flow, train one model per configuration and evaluate it.

use crate::error::Result;
use crate::eval::{evaluate_run, EvalReport};
use crate::flow::FlowParams;
use crate::frame::{build_dataset, DatasetParams, Frame};
use crate::model::{train_with, ModelConfig, Network, TrainConfig};
use crate::offsets::{EllipseSpec, OffsetTable};
use crate::pipeline::{synthesize_all_channels, DEFAULT_FLOW_CLAMP};
use crate::synth::SceneConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train_scene: SceneConfig,
    pub test_scene: SceneConfig,
    pub flow: FlowParams,
    pub flow_clamp: f32,
    pub ellipse: EllipseSpec,
    pub patch_size: usize,
    pub stride: usize,
    pub tau: f64,
    /// Cap on training patches; `None` trains on all of them.
    pub max_train_samples: Option<usize>,
    pub train: TrainConfig,
    pub k_values: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train_scene: SceneConfig {
                seed: 101,
                frames: 80,
                ..SceneConfig::default()
            },
            test_scene: SceneConfig {
                seed: 202,
                frames: 20,
                ..SceneConfig::default()
            },
            flow: FlowParams::default(),
            flow_clamp: DEFAULT_FLOW_CLAMP,
            ellipse: EllipseSpec::default(),
            patch_size: 32,
            stride: 32,
            tau: DatasetParams::DEFAULT_TAU,
            max_train_samples: None,
            train: TrainConfig::default(),
            k_values: (1..=8).collect(),
        }
    }
}

/// Rendered frames with all channels, shared by every model of a run.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub offsets: OffsetTable,
    pub train: Vec<Frame>,
    pub test: Vec<Frame>,
}

#[derive(Debug, Clone)]
pub struct ModelRun {
    pub network: Network<f32>,
    pub losses: Vec<f64>,
    pub train_patches: usize,
    pub report: EvalReport,
}

impl ExperimentConfig {
    pub fn prepare(&self) -> Result<PreparedData> {
        Ok(PreparedData {
            offsets: OffsetTable::from_ellipse(&self.ellipse)?,
            train: synthesize_all_channels(&self.train_scene, &self.flow, self.flow_clamp)?,
            test: synthesize_all_channels(&self.test_scene, &self.flow, self.flow_clamp)?,
        })
    }

    fn dataset_params(&self, model: &ModelConfig) -> DatasetParams {
        DatasetParams {
            patch_size: self.patch_size,
            stride: self.stride,
            tau: self.tau,
            ..DatasetParams::new(model.channels.clone())
        }
    }

    /// Trains `model` on the training frames and evaluates on the test frames.
    pub fn run_model(&self, data: &PreparedData, model: ModelConfig) -> Result<ModelRun> {
        let params = self.dataset_params(&model);
        let mut dataset = build_dataset(&data.train, &data.offsets, &params, "train", self.train_scene.seed)?;
        if let Some(max) = self.max_train_samples {
            dataset = dataset.subsample(max, self.train.seed);
        }
        let samples = dataset.materialize_all(&data.train)?;
        let mut network = Network::build(model)?;
        let losses = train_with(&mut network, &samples, &self.train, |_, _| {})?;
        let report = evaluate_run(&network, &data.test, &data.offsets, &params, &self.k_values)?;
        Ok(ModelRun {
            network,
            losses,
            train_patches: samples.len(),
            report,
        })
    }
}
