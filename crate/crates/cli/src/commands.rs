//! Subcommand flags and implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{ArgAction, Args};
use mmreg::eval::{emit_report, evaluate_run};
use mmreg::flow::FlowParams;
use mmreg::frame::{build_dataset, ChannelId, ChannelList, DatasetManifest, DatasetParams, PatchDataset};
use mmreg::kv::KeyValues;
use mmreg::model::{
    check_channels, load_checkpoint, parse_filters, save_checkpoint, train_with, ModelConfig, Network, TrainConfig,
};
use mmreg::offsets::{EllipseSpec, OffsetTable};
use mmreg::pipeline::{add_flow, add_gray, read_sequence, write_sequence};
use mmreg::synth::{generate_sequence, ObjectKinds, SceneConfig};

use crate::config::write_resolved;

const MANIFEST_FILE: &str = "manifest.txt";
const INDEX_FILE: &str = "patches.idx";
const SOURCE_FILE: &str = "source.txt";

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub frames: usize,
    #[arg(long, default_value_t = 800)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    #[arg(long, default_value_t = 48)]
    pub objects: usize,
    /// rect, ellipse or mixed.
    #[arg(long, default_value_t = ObjectKinds::Mixed)]
    pub kinds: ObjectKinds,
    /// Nearest object depth.
    #[arg(long, default_value_t = 2.0)]
    pub near: f32,
    /// Farthest object depth.
    #[arg(long, default_value_t = 40.0)]
    pub far: f32,
    /// Camera motion, pixels per frame.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub tx: f32,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub ty: f32,
    /// Extra image speed of near objects over far ones.
    #[arg(long, default_value_t = 1.0)]
    pub parallax: f32,
    /// Per-object position jitter, pixels.
    #[arg(long, default_value_t = 0.5)]
    pub jitter: f32,
    /// Video noise amplitude, at most 0.2.
    #[arg(long, default_value_t = 0.02)]
    pub noise: f32,
    /// key=value file of flag defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct FlowArgs {
    /// Sequence directory written by `synth`.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Smoothness weight, in 8-bit grey levels.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f32,
    #[arg(long, default_value_t = 200)]
    pub iterations: usize,
    /// Velocity mapped to the ends of the [0, 1] channel range.
    #[arg(long, default_value_t = 8.0)]
    pub clamp: f32,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct DatasetArgs {
    /// Sequence directory with the channels to stack plus L.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Channels to stack, e.g. GrLUV, RGBL or RGBLUV.
    #[arg(long, default_value = "GrLUV")]
    pub channels: ChannelList,
    #[arg(long, default_value_t = 32)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 32)]
    pub stride: usize,
    /// Minimum depth variance of a kept patch (0.15 × 0.25).
    #[arg(long, default_value_t = DatasetParams::DEFAULT_TAU)]
    pub tau: f64,
    /// Number of offset classes, including the aligned one.
    #[arg(long, default_value_t = 9)]
    pub classes: usize,
    /// Ellipse major axis, pixels.
    #[arg(long, default_value_t = 32.0)]
    pub major: f64,
    /// Ellipse minor axis, pixels.
    #[arg(long, default_value_t = 16.0)]
    pub minor: f64,
    /// Ellipse rotation, degrees clockwise.
    #[arg(long, default_value_t = 45.0, allow_negative_numbers = true)]
    pub rotation: f64,
    /// Depth written into pixels vacated by a shift.
    #[arg(long, default_value_t = 0.0)]
    pub fill: f32,
    #[arg(long, default_value = "train")]
    pub split: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    /// Directory written by `dataset`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Channels to train on; defaults to the dataset's.
    #[arg(long)]
    pub channels: Option<ChannelList>,
    /// Filters per convolution stage.
    #[arg(long, default_value = "32,32,64")]
    pub filters: String,
    /// Square kernel size, odd.
    #[arg(long, default_value_t = 5)]
    pub kernel: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// 0 writes the initialized network.
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 100)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub shuffle: bool,
    /// Train on a seeded random subset of at most this many patches; 0 uses all.
    #[arg(long, default_value_t = 0)]
    pub max_samples: usize,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Sequence directory to evaluate on.
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Temporal fusion window sizes.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 32)]
    pub stride: usize,
    #[arg(long, default_value_t = DatasetParams::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = 32.0)]
    pub major: f64,
    #[arg(long, default_value_t = 16.0)]
    pub minor: f64,
    #[arg(long, default_value_t = 45.0, allow_negative_numbers = true)]
    pub rotation: f64,
    #[arg(long, default_value_t = 0.0)]
    pub fill: f32,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn synth(a: SynthArgs, resolved: KeyValues) -> anyhow::Result<()> {
    let cfg = SceneConfig {
        seed: a.seed,
        frames: a.frames,
        width: a.width,
        height: a.height,
        objects: a.objects,
        kinds: a.kinds,
        depth_range: (a.near, a.far),
        translation: (a.tx, a.ty),
        parallax: a.parallax,
        jitter: a.jitter,
        noise: a.noise,
    };
    let frames = generate_sequence(&cfg)?;
    write_sequence(&a.out, &frames, &KeyValues::new())?;
    write_resolved(&a.out, &resolved)?;
    println!("wrote {} frames to {}", frames.len(), a.out.display());
    Ok(())
}

pub fn flow(a: FlowArgs, resolved: KeyValues) -> anyhow::Result<()> {
    let (frames, _) = read_sequence(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let has_rgb = [ChannelId::R, ChannelId::G, ChannelId::B]
        .iter()
        .all(|&c| frames.iter().all(|f| f.get(c).is_some()));
    let frames = if has_rgb { add_gray(&frames)? } else { frames };
    let params = FlowParams {
        alpha: a.alpha,
        iterations: a.iterations,
    };
    let frames = add_flow(&frames, &params, a.clamp)?;
    write_sequence(&a.out, &frames, &KeyValues::new())?;
    write_resolved(&a.out, &resolved)?;
    println!("wrote {} frames with flow to {}", frames.len(), a.out.display());
    Ok(())
}

pub fn dataset(a: DatasetArgs, resolved: KeyValues) -> anyhow::Result<()> {
    let (frames, _) = read_sequence(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let offsets = OffsetTable::from_ellipse(&EllipseSpec {
        n_classes: a.classes,
        major_axis: a.major,
        minor_axis: a.minor,
        rotation_deg: a.rotation,
    })?;
    let params = DatasetParams {
        patch_size: a.patch_size,
        stride: a.stride,
        channels: a.channels,
        tau: a.tau,
        fill: a.fill,
    };
    let ds = build_dataset(&frames, &offsets, &params, &a.split, a.seed)?;
    create_dir(&a.out)?;
    ds.manifest.write(a.out.join(MANIFEST_FILE))?;
    let index = a.out.join(INDEX_FILE);
    fs::write(&index, ds.index_to_csv()).with_context(|| format!("writing {}", index.display()))?;
    let source = fs::canonicalize(&a.input).with_context(|| format!("resolving {}", a.input.display()))?;
    let mut src = KeyValues::new();
    src.push("frames", source.display());
    fs::write(a.out.join(SOURCE_FILE), src.to_text()).context("writing dataset source")?;
    write_resolved(&a.out, &resolved)?;
    println!(
        "{} patches from {} frames x {} offsets written to {}",
        ds.len(),
        frames.len(),
        offsets.len(),
        a.out.display()
    );
    Ok(())
}

fn load_dataset(dir: &Path) -> anyhow::Result<(PatchDataset, PathBuf)> {
    let manifest = DatasetManifest::read(dir.join(MANIFEST_FILE))?;
    let index = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&index).with_context(|| format!("reading {}", index.display()))?;
    let entries = PatchDataset::index_from_csv(&text)?;
    let src_path = dir.join(SOURCE_FILE);
    let src: KeyValues = fs::read_to_string(&src_path)
        .with_context(|| format!("reading {}", src_path.display()))?
        .parse()?;
    Ok((
        PatchDataset { manifest, entries },
        PathBuf::from(src.require("frames")?),
    ))
}

pub fn train(a: TrainArgs, resolved: KeyValues) -> anyhow::Result<()> {
    let (mut ds, frames_dir) = load_dataset(&a.dataset)?;
    if let Some(ch) = a.channels {
        ds.manifest.channels = ch;
    }
    let model = ModelConfig {
        patch_size: ds.manifest.patch_size,
        channels: ds.manifest.channels.clone(),
        filters: parse_filters(&a.filters)?,
        kernel_size: a.kernel,
        classes: ds.manifest.offsets.len(),
        seed: a.seed,
    };
    let cfg = TrainConfig {
        batch_size: a.batch,
        epochs: a.epochs,
        learning_rate: a.lr,
        momentum: a.momentum,
        seed: a.seed,
        shuffle: a.shuffle,
    };
    cfg.validate()?;
    let mut network = Network::build(model)?;
    create_dir(&a.out)?;
    let mut losses = Vec::new();
    if a.epochs > 0 {
        let (frames, _) = read_sequence(&frames_dir).with_context(|| format!("reading {}", frames_dir.display()))?;
        if a.max_samples > 0 {
            ds = ds.subsample(a.max_samples, a.seed);
        }
        let samples = ds.materialize_all(&frames)?;
        println!("training on {} patches", samples.len());
        losses = train_with(&mut network, &samples, &cfg, |epoch, loss| {
            println!("epoch {:>3}  loss {loss:.6}", epoch + 1);
        })?;
    }
    save_checkpoint(&network, a.out.join("model.mmrc"))?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        csv.push_str(&format!("{},{l}\n", i + 1));
    }
    fs::write(a.out.join("loss.csv"), csv).context("writing loss history")?;
    write_resolved(&a.out, &resolved)?;
    println!("checkpoint written to {}", a.out.join("model.mmrc").display());
    Ok(())
}

pub fn eval(a: EvalArgs, resolved: KeyValues) -> anyhow::Result<()> {
    let network =
        load_checkpoint(&a.checkpoint).with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    let cfg = network.config().clone();
    check_channels(&network, &cfg.channels)?;
    let (frames, _) = read_sequence(&a.frames).with_context(|| format!("reading {}", a.frames.display()))?;
    if a.k.is_empty() {
        bail!("--k needs at least one window size");
    }
    let offsets = OffsetTable::from_ellipse(&EllipseSpec {
        n_classes: cfg.classes,
        major_axis: a.major,
        minor_axis: a.minor,
        rotation_deg: a.rotation,
    })?;
    let params = DatasetParams {
        patch_size: cfg.patch_size,
        stride: a.stride,
        channels: cfg.channels.clone(),
        tau: a.tau,
        fill: a.fill,
    };
    let report = evaluate_run(&network, &frames, &offsets, &params, &a.k)?;
    let summary = emit_report(&report, &a.out)?;
    write_resolved(&a.out, &resolved)?;
    print!("{}", summary.to_text());
    Ok(())
}
