//! Multi-channel frames and the preprocessing that turns them into labeled
//! patch datasets.

mod dataset;
mod mmf;
mod ops;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) use dataset::surviving_origins;
pub use dataset::{build_dataset, DatasetManifest, DatasetParams, PatchDataset, PatchRef, PatchSample, SplitStats};
pub use mmf::{decode_frame, encode_frame, read_frame, write_frame, MMF_MAGIC};
pub use ops::{apply_offset, extract_patches, patch_grid, rgb_to_gray, variance_keep, LocatedPatch, PatchGrid};
pub(crate) use ops::{check_offset, stack_patch};

pub const DEFAULT_WIDTH: usize = 800;
pub const DEFAULT_HEIGHT: usize = 256;

/// Channel identifiers; the discriminant is the on-disk MMF id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum ChannelId {
    R = 0,
    G = 1,
    B = 2,
    Gr = 3,
    L = 4,
    U = 5,
    V = 6,
}

impl ChannelId {
    pub const ALL: [ChannelId; 7] = [
        ChannelId::R,
        ChannelId::G,
        ChannelId::B,
        ChannelId::Gr,
        ChannelId::L,
        ChannelId::U,
        ChannelId::V,
    ];

    pub fn from_u8(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelId::R => "R",
            ChannelId::G => "G",
            ChannelId::B => "B",
            ChannelId::Gr => "Gr",
            ChannelId::L => "L",
            ChannelId::U => "U",
            ChannelId::V => "V",
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered, duplicate-free channel list such as `GrLUV` or `RGBL`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChannelList(Vec<ChannelId>);

impl ChannelList {
    pub fn new(ids: Vec<ChannelId>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::invalid("channel list is empty"));
        }
        for (i, a) in ids.iter().enumerate() {
            if ids[..i].contains(a) {
                return Err(Error::invalid(format!("channel {a} listed twice")));
            }
        }
        Ok(Self(ids))
    }

    pub fn ids(&self) -> &[ChannelId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: ChannelId) -> bool {
        self.0.contains(&id)
    }

    pub fn position(&self, id: ChannelId) -> Option<usize> {
        self.0.iter().position(|&c| c == id)
    }
}

impl fmt::Display for ChannelList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.0 {
            f.write_str(c.as_str())?;
        }
        Ok(())
    }
}

impl FromStr for ChannelList {
    type Err = Error;

    /// Accepts concatenated (`GrLUV`) or separated (`Gr,L,U,V`) forms.
    fn from_str(s: &str) -> Result<Self> {
        let mut ids = Vec::new();
        let mut rest = s.trim();
        while !rest.is_empty() {
            rest = rest.trim_start_matches([',', ' ']);
            if rest.is_empty() {
                break;
            }
            let (id, len) = if rest.starts_with("Gr") {
                (ChannelId::Gr, 2)
            } else {
                let id = match rest.as_bytes()[0] {
                    b'R' => ChannelId::R,
                    b'G' => ChannelId::G,
                    b'B' => ChannelId::B,
                    b'L' => ChannelId::L,
                    b'U' => ChannelId::U,
                    b'V' => ChannelId::V,
                    _ => return Err(Error::Parse(format!("unknown channel in {s:?} at {rest:?}"))),
                };
                (id, 1)
            };
            ids.push(id);
            rest = &rest[len..];
        }
        ChannelList::new(ids)
    }
}

/// A `height × width` row-major plane of samples nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "plane dims must be positive, got {width}×{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::shape("Plane::new", &[height, width], &[data.len()]));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.data[row * self.width + col] = value;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.width..(row + 1) * self.width]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: Vec<(ChannelId, Plane)>,
}

impl Frame {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            channels: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Inserts or replaces a channel; new channels are appended.
    pub fn insert(&mut self, id: ChannelId, plane: Plane) -> Result<()> {
        if plane.width != self.width || plane.height != self.height {
            return Err(Error::shape(
                "Frame::insert",
                &[self.height, self.width],
                &[plane.height, plane.width],
            ));
        }
        match self.channels.iter_mut().find(|(c, _)| *c == id) {
            Some(slot) => slot.1 = plane,
            None => self.channels.push((id, plane)),
        }
        Ok(())
    }

    pub fn with(mut self, id: ChannelId, plane: Plane) -> Result<Self> {
        self.insert(id, plane)?;
        Ok(self)
    }

    pub fn get(&self, id: ChannelId) -> Option<&Plane> {
        self.channels.iter().find(|(c, _)| *c == id).map(|(_, p)| p)
    }

    pub fn get_mut(&mut self, id: ChannelId) -> Option<&mut Plane> {
        self.channels.iter_mut().find(|(c, _)| *c == id).map(|(_, p)| p)
    }

    pub fn require(&self, id: ChannelId) -> Result<&Plane> {
        self.get(id)
            .ok_or_else(|| Error::invalid(format!("frame has no {id} channel")))
    }

    pub fn channel_ids(&self) -> Vec<ChannelId> {
        self.channels.iter().map(|(c, _)| *c).collect()
    }

    pub fn channels(&self) -> impl Iterator<Item = (ChannelId, &Plane)> {
        self.channels.iter().map(|(c, p)| (*c, p))
    }
}
