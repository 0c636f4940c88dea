//! Labeled patch datasets.
//!
//! Every frame is replayed once per offset class with its depth plane shifted
//! by that class's offset. Windows whose shifted depth values are too flat are
//! dropped; survivors are labeled with the class id. Datasets are stored as a
//! list of [`PatchRef`]s and materialized from the frames on demand.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::offsets::{OffsetClass, OffsetTable};
use crate::tensor::Tensor;

use super::ops::{check_offset, population_variance, shifted_value, stack_patch};
use super::{patch_grid, ChannelId, ChannelList, Frame};

const MANIFEST_FORMAT: &str = "mmreg-dataset/1";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetParams {
    pub patch_size: usize,
    pub stride: usize,
    pub channels: ChannelList,
    /// Minimum population variance of a patch's shifted depth values.
    pub tau: f64,
    /// Depth value written into pixels vacated by a shift.
    pub fill: f32,
}

impl DatasetParams {
    /// 15% of the largest possible variance of a `[0, 1]` signal (0.25).
    pub const DEFAULT_TAU: f64 = 0.15 * 0.25;

    pub fn new(channels: ChannelList) -> Self {
        Self {
            patch_size: 32,
            stride: 32,
            channels,
            tau: Self::DEFAULT_TAU,
            fill: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchRef {
    pub frame_index: usize,
    pub label: usize,
    /// `(row, col)` of the top-left pixel.
    pub origin: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample {
    /// `p×p×C`, channels in manifest order.
    pub data: Tensor<f32>,
    pub label: usize,
    pub frame_index: usize,
    pub origin: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitStats {
    pub name: String,
    pub frames: usize,
    pub patches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub patch_size: usize,
    pub stride: usize,
    pub channels: ChannelList,
    pub offsets: OffsetTable,
    pub tau: f64,
    pub fill: f32,
    pub seed: u64,
    pub splits: Vec<SplitStats>,
}

impl DatasetManifest {
    pub fn params(&self) -> DatasetParams {
        DatasetParams {
            patch_size: self.patch_size,
            stride: self.stride,
            channels: self.channels.clone(),
            tau: self.tau,
            fill: self.fill,
        }
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("format", MANIFEST_FORMAT);
        kv.push("patch_size", self.patch_size);
        kv.push("stride", self.stride);
        kv.push("channels", &self.channels);
        kv.push("n_classes", self.offsets.len());
        kv.push("offsets", &self.offsets);
        kv.push("tau", self.tau);
        kv.push("fill", self.fill);
        kv.push("seed", self.seed);
        let names: Vec<&str> = self.splits.iter().map(|s| s.name.as_str()).collect();
        kv.push("splits", names.join(","));
        for s in &self.splits {
            kv.push(&format!("split.{}.frames", s.name), s.frames);
            kv.push(&format!("split.{}.patches", s.name), s.patches);
        }
        kv
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let format = kv.require("format")?;
        if format != MANIFEST_FORMAT {
            return Err(Error::Parse(format!(
                "unsupported manifest format {format:?}, expected {MANIFEST_FORMAT:?}"
            )));
        }
        let offsets: OffsetTable = kv.parse_as("offsets")?;
        let n: usize = kv.parse_as("n_classes")?;
        if n != offsets.len() {
            return Err(Error::Parse(format!(
                "n_classes={n} disagrees with {} listed offsets",
                offsets.len()
            )));
        }
        let mut splits = Vec::new();
        for name in kv.require("splits")?.split(',').filter(|s| !s.is_empty()) {
            splits.push(SplitStats {
                name: name.to_string(),
                frames: kv.parse_as(&format!("split.{name}.frames"))?,
                patches: kv.parse_as(&format!("split.{name}.patches"))?,
            });
        }
        Ok(Self {
            patch_size: kv.parse_as("patch_size")?,
            stride: kv.parse_as("stride")?,
            channels: kv.parse_as("channels")?,
            offsets,
            tau: kv.parse_as("tau")?,
            fill: kv.parse_as("fill")?,
            seed: kv.parse_as("seed")?,
            splits,
        })
    }

    pub fn to_text(&self) -> String {
        self.to_key_values().to_text()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_key_values(&text.parse()?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchDataset {
    pub manifest: DatasetManifest,
    pub entries: Vec<PatchRef>,
}

impl PatchDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn offset(&self, label: usize) -> Result<&OffsetClass> {
        self.manifest
            .offsets
            .get(label)
            .ok_or_else(|| Error::invalid(format!("label {label} not in the class table")))
    }

    /// Builds one sample from the unshifted source frames.
    pub fn materialize(&self, entry: &PatchRef, frames: &[Frame]) -> Result<PatchSample> {
        let frame = frames.get(entry.frame_index).ok_or_else(|| {
            Error::invalid(format!(
                "patch refers to frame {} but only {} frames were given",
                entry.frame_index,
                frames.len()
            ))
        })?;
        let off = self.offset(entry.label)?;
        let m = &self.manifest;
        let data = stack_patch(
            frame,
            &m.channels,
            entry.origin,
            m.patch_size,
            Some((off.dx, off.dy, m.fill)),
        )?;
        Ok(PatchSample {
            data,
            label: entry.label,
            frame_index: entry.frame_index,
            origin: entry.origin,
        })
    }

    pub fn samples<'a>(&'a self, frames: &'a [Frame]) -> impl Iterator<Item = Result<PatchSample>> + 'a {
        self.entries.iter().map(move |e| self.materialize(e, frames))
    }

    pub fn materialize_all(&self, frames: &[Frame]) -> Result<Vec<PatchSample>> {
        self.entries.par_iter().map(|e| self.materialize(e, frames)).collect()
    }

    /// Random subset of at most `max` entries drawn with `seed`, kept in
    /// index order.
    pub fn subsample(&self, max: usize, seed: u64) -> PatchDataset {
        if max >= self.entries.len() {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, self.entries.len(), max).into_vec();
        picked.sort_unstable();
        let mut manifest = self.manifest.clone();
        if let [split] = manifest.splits.as_mut_slice() {
            split.patches = max;
        }
        PatchDataset {
            manifest,
            entries: picked.into_iter().map(|i| self.entries[i]).collect(),
        }
    }

    /// `frame_index,label,row,col` lines.
    pub fn index_to_csv(&self) -> String {
        let mut s = String::from("frame_index,label,row,col\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{}\n",
                e.frame_index, e.label, e.origin.0, e.origin.1
            ));
        }
        s
    }

    pub fn index_from_csv(text: &str) -> Result<Vec<PatchRef>> {
        let mut lines = text.lines();
        match lines.next() {
            Some("frame_index,label,row,col") => {}
            other => return Err(Error::Parse(format!("bad patch index header {other:?}"))),
        }
        lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, line)| {
                let f: Vec<usize> = line
                    .split(',')
                    .map(|x| x.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Parse(format!("patch index line {}: {e}", n + 2)))?;
                if f.len() != 4 {
                    return Err(Error::Parse(format!("patch index line {}: expected 4 fields", n + 2)));
                }
                Ok(PatchRef {
                    frame_index: f[0],
                    label: f[1],
                    origin: (f[2], f[3]),
                })
            })
            .collect()
    }
}

/// Surviving windows of one frame under one offset class, in row-major order.
pub(crate) fn surviving_origins(
    frame: &Frame,
    offset: &OffsetClass,
    params: &DatasetParams,
) -> Result<Vec<(usize, usize)>> {
    check_offset(frame, offset)?;
    let grid = patch_grid(frame.width(), frame.height(), params.patch_size, params.stride)?;
    let depth = frame.require(ChannelId::L)?;
    let p = params.patch_size;
    let mut values = vec![0.0f32; p * p];
    let mut keep = Vec::new();
    for origin in grid.origins() {
        if params.tau > 0.0 {
            for r in 0..p {
                for c in 0..p {
                    values[r * p + c] =
                        shifted_value(depth, origin.0 + r, origin.1 + c, offset.dx, offset.dy, params.fill);
                }
            }
            if population_variance(&values) < params.tau {
                continue;
            }
        }
        keep.push(origin);
    }
    Ok(keep)
}

/// Builds the labeled patch index for `frames` under every offset class.
/// Entries are ordered by frame, then class, then window.
pub fn build_dataset(
    frames: &[Frame],
    offsets: &OffsetTable,
    params: &DatasetParams,
    split: &str,
    seed: u64,
) -> Result<PatchDataset> {
    if frames.is_empty() {
        return Err(Error::EmptyDataset("no frames given".into()));
    }
    for frame in frames {
        for &c in params.channels.ids() {
            frame.require(c)?;
        }
        frame.require(ChannelId::L)?;
    }
    let per_frame: Vec<Vec<PatchRef>> = frames
        .par_iter()
        .enumerate()
        .map(|(frame_index, frame)| {
            let mut out = Vec::new();
            for off in offsets.classes() {
                for origin in surviving_origins(frame, off, params)? {
                    out.push(PatchRef {
                        frame_index,
                        label: off.id,
                        origin,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let entries: Vec<PatchRef> = per_frame.into_iter().flatten().collect();
    if entries.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no patch passed the depth variance filter (tau = {}); try a lower tau",
            params.tau
        )));
    }
    let manifest = DatasetManifest {
        patch_size: params.patch_size,
        stride: params.stride,
        channels: params.channels.clone(),
        offsets: offsets.clone(),
        tau: params.tau,
        fill: params.fill,
        seed,
        splits: vec![SplitStats {
            name: split.to_string(),
            frames: frames.len(),
            patches: entries.len(),
        }],
    };
    Ok(PatchDataset { manifest, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{apply_offset, extract_patches, Plane};
    use crate::offsets::EllipseSpec;

    fn frame(w: usize, h: usize) -> Frame {
        let mk = |k: usize| Plane::new(w, h, (0..w * h).map(|i| ((i * k) % 97) as f32 / 96.0).collect()).unwrap();
        Frame::new(w, h)
            .with(ChannelId::Gr, mk(7))
            .unwrap()
            .with(ChannelId::L, mk(13))
            .unwrap()
            .with(ChannelId::U, mk(3))
            .unwrap()
            .with(ChannelId::V, mk(5))
            .unwrap()
    }

    fn params(tau: f64) -> DatasetParams {
        DatasetParams {
            tau,
            ..DatasetParams::new("GrLUV".parse().unwrap())
        }
    }

    #[test]
    fn one_frame_nine_offsets_no_filter() {
        let offsets = OffsetTable::from_ellipse(&EllipseSpec::default()).unwrap();
        let ds = build_dataset(&[frame(800, 256)], &offsets, &params(0.0), "train", 1).unwrap();
        assert_eq!(ds.len(), 1800);
        assert_eq!(ds.manifest.splits[0].patches, 1800);
    }

    #[test]
    fn materialized_patch_equals_shift_then_extract() {
        let offsets = OffsetTable::from_ellipse(&EllipseSpec::default()).unwrap();
        let frames = [frame(96, 64)];
        let p = DatasetParams {
            patch_size: 32,
            stride: 16,
            ..params(0.0)
        };
        let ds = build_dataset(&frames, &offsets, &p, "t", 0).unwrap();
        for off in offsets.classes() {
            let shifted = apply_offset(&frames[0], off, 0.0).unwrap();
            let direct = extract_patches(&shifted, &p.channels, 32, 16).unwrap();
            let from_index: Vec<_> = ds
                .entries
                .iter()
                .filter(|e| e.label == off.id)
                .map(|e| ds.materialize(e, &frames).unwrap())
                .collect();
            assert_eq!(direct.len(), from_index.len());
            for ((origin, t), s) in direct.iter().zip(&from_index) {
                assert_eq!(*origin, s.origin);
                assert_eq!(t, &s.data);
            }
        }
    }

    #[test]
    fn flat_depth_is_rejected_with_hint() {
        let mut f = frame(64, 64);
        f.insert(ChannelId::L, Plane::filled(64, 64, 0.5)).unwrap();
        let offsets = OffsetTable::from_ellipse(&EllipseSpec::default()).unwrap();
        let err = build_dataset(&[f], &offsets, &params(0.1), "t", 0).unwrap_err();
        assert!(err.to_string().contains("lower tau"), "{err}");
    }

    #[test]
    fn manifest_and_index_round_trip() {
        let offsets = OffsetTable::from_ellipse(&EllipseSpec::default()).unwrap();
        let ds = build_dataset(&[frame(128, 64)], &offsets, &params(0.05), "test", 9).unwrap();
        let back = DatasetManifest::from_text(&ds.manifest.to_text()).unwrap();
        assert_eq!(back, ds.manifest);
        let entries = PatchDataset::index_from_csv(&ds.index_to_csv()).unwrap();
        assert_eq!(entries, ds.entries);
    }

    #[test]
    fn missing_channel_rejected() {
        let f = Frame::new(32, 32)
            .with(ChannelId::L, Plane::filled(32, 32, 0.0))
            .unwrap();
        let offsets = OffsetTable::from_ellipse(&EllipseSpec::default()).unwrap();
        assert!(build_dataset(&[f], &offsets, &params(0.0), "t", 0).is_err());
    }

    #[test]
    fn subsample_is_seeded_ordered_subset() {
        let offsets = OffsetTable::from_ellipse(&EllipseSpec::default()).unwrap();
        let ds = build_dataset(&[frame(800, 256)], &offsets, &params(0.0), "train", 0).unwrap();
        let a = ds.subsample(100, 5);
        assert_eq!(a, ds.subsample(100, 5));
        assert_ne!(a.entries, ds.subsample(100, 6).entries);
        assert_eq!(a.len(), 100);
        assert_eq!(a.manifest.splits[0].patches, 100);
        assert!(a.entries.windows(2).all(|w| {
            let pos = |e: &PatchRef| ds.entries.iter().position(|x| x == e).unwrap();
            pos(&w[0]) < pos(&w[1])
        }));
        assert_eq!(ds.subsample(5000, 1), ds);
    }
}
