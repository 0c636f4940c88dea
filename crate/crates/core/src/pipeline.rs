//! Channel derivation shared by the CLI and experiments (grayscale from RGB,
//! optical-flow planes from consecutive grayscale frames) and on-disk frame
//! sequences.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{estimate_flow, flow_to_channels, FlowParams};
use crate::frame::{read_frame, rgb_to_gray, write_frame, ChannelId, Frame, Plane};
use crate::kv::KeyValues;
use crate::synth::{generate_sequence, SceneConfig};

pub const DEFAULT_FLOW_CLAMP: f32 = 8.0;

pub fn add_gray(frames: &[Frame]) -> Result<Vec<Frame>> {
    frames.par_iter().map(rgb_to_gray).collect()
}

/// Adds U and V to every frame. Frame `t` receives the flow from frame
/// `t − 1` to `t`; the first frame receives zero flow.
pub fn add_flow(frames: &[Frame], params: &FlowParams, clamp: f32) -> Result<Vec<Frame>> {
    let planes: Vec<(Plane, Plane)> = (0..frames.len())
        .into_par_iter()
        .map(|t| {
            let cur = &frames[t];
            if t == 0 {
                let zero = crate::flow::FlowField::zeros(cur.width(), cur.height());
                return flow_to_channels(&zero, clamp);
            }
            let flow = estimate_flow(
                frames[t - 1].require(ChannelId::Gr)?,
                cur.require(ChannelId::Gr)?,
                params,
            )?;
            flow_to_channels(&flow, clamp)
        })
        .collect::<Result<_>>()?;
    frames
        .iter()
        .zip(planes)
        .map(|(f, (u, v))| f.clone().with(ChannelId::U, u)?.with(ChannelId::V, v))
        .collect()
}

/// Synthetic sequence with all seven channels.
pub fn synthesize_all_channels(scene: &SceneConfig, flow: &FlowParams, clamp: f32) -> Result<Vec<Frame>> {
    let frames = add_gray(&generate_sequence(scene)?)?;
    add_flow(&frames, flow, clamp)
}

pub const SEQUENCE_MANIFEST: &str = "sequence.txt";
const SEQUENCE_FORMAT: &str = "mmreg-sequence/1";

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.mmf")
}

/// Writes `frames` as numbered MMF files plus a manifest holding the frame
/// count and any `extra` entries.
pub fn write_sequence(dir: impl AsRef<Path>, frames: &[Frame], extra: &KeyValues) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut kv = KeyValues::new();
    kv.push("format", SEQUENCE_FORMAT);
    kv.push("frames", frames.len());
    for (k, v) in extra.iter() {
        kv.push(k, v);
    }
    frames
        .par_iter()
        .enumerate()
        .try_for_each(|(i, f)| write_frame(f, dir.join(frame_file_name(i))))?;
    let path = dir.join(SEQUENCE_MANIFEST);
    fs::write(&path, kv.to_text()).map_err(|e| Error::io(path, e))
}

/// Reads a sequence written by [`write_sequence`], returning the frames in
/// order and the manifest.
pub fn read_sequence(dir: impl AsRef<Path>) -> Result<(Vec<Frame>, KeyValues)> {
    let dir = dir.as_ref();
    let path = dir.join(SEQUENCE_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let kv: KeyValues = text.parse()?;
    let format = kv.require("format")?;
    if format != SEQUENCE_FORMAT {
        return Err(Error::Parse(format!("unsupported sequence format {format:?}")));
    }
    let count: usize = kv.parse_as("frames")?;
    if count == 0 {
        return Err(Error::EmptyDataset(format!(
            "sequence in {} has no frames",
            dir.display()
        )));
    }
    let frames = (0..count)
        .into_par_iter()
        .map(|i| read_frame(dir.join(frame_file_name(i))))
        .collect::<Result<Vec<_>>>()?;
    Ok((frames, kv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> Vec<Frame> {
        crate::synth::generate_sequence(&SceneConfig {
            seed,
            frames: 3,
            width: 48,
            height: 32,
            objects: 3,
            ..SceneConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn first_frame_gets_zero_flow() {
        let frames = add_flow(&add_gray(&tiny(3)).unwrap(), &FlowParams::default(), DEFAULT_FLOW_CLAMP).unwrap();
        for id in [ChannelId::U, ChannelId::V] {
            assert!(frames[0].require(id).unwrap().data().iter().all(|&x| x == 0.5));
        }
        assert!(frames[1]
            .require(ChannelId::U)
            .unwrap()
            .data()
            .iter()
            .any(|&x| x != 0.5));
    }

    #[test]
    fn identical_frames_map_to_half() {
        let f = add_gray(&tiny(4)[..1]).unwrap().remove(0);
        let frames = add_flow(&[f.clone(), f], &FlowParams::default(), DEFAULT_FLOW_CLAMP).unwrap();
        assert!(frames[1]
            .require(ChannelId::V)
            .unwrap()
            .data()
            .iter()
            .all(|&x| (x - 0.5).abs() < 1e-6));
    }

    #[test]
    fn sequence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let frames = tiny(5);
        let mut extra = KeyValues::new();
        extra.push("seed", 5);
        write_sequence(dir.path(), &frames, &extra).unwrap();
        let (back, kv) = read_sequence(dir.path()).unwrap();
        assert_eq!(back, frames);
        assert_eq!(kv.get("seed"), Some("5"));
        fs::remove_file(dir.path().join(frame_file_name(1))).unwrap();
        assert!(read_sequence(dir.path()).is_err());
    }
}
