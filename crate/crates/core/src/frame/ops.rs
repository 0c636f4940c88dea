use crate::error::{Error, Result};
use crate::offsets::OffsetClass;
use crate::tensor::Tensor;

use super::{ChannelId, ChannelList, Frame, Plane};

/// Value of the depth plane after translating it by `(dx, dy)`, reading
/// `fill` where the shifted plane has no source pixel.
#[inline]
pub(crate) fn shifted_value(plane: &Plane, row: usize, col: usize, dx: i32, dy: i32, fill: f32) -> f32 {
    let sr = row as i64 - dy as i64;
    let sc = col as i64 - dx as i64;
    if sr < 0 || sc < 0 || sr >= plane.height() as i64 || sc >= plane.width() as i64 {
        fill
    } else {
        plane.get(sr as usize, sc as usize)
    }
}

pub(crate) fn check_offset(frame: &Frame, offset: &OffsetClass) -> Result<()> {
    if offset.dx.unsigned_abs() as usize >= frame.width() || offset.dy.unsigned_abs() as usize >= frame.height() {
        return Err(Error::invalid(format!(
            "offset ({}, {}) exceeds frame {}×{}",
            offset.dx,
            offset.dy,
            frame.width(),
            frame.height()
        )));
    }
    Ok(())
}

/// Translates only the L plane by the offset; every other plane is untouched.
pub fn apply_offset(frame: &Frame, offset: &OffsetClass, fill: f32) -> Result<Frame> {
    check_offset(frame, offset)?;
    let depth = frame.require(ChannelId::L)?;
    let (w, h) = (frame.width(), frame.height());
    let mut shifted = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            shifted.push(shifted_value(depth, row, col, offset.dx, offset.dy, fill));
        }
    }
    let mut out = frame.clone();
    out.insert(ChannelId::L, Plane::new(w, h, shifted)?)?;
    Ok(out)
}

/// Window origins `(i·s, j·s)` of all `p×p` windows fully inside a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
    pub patch: usize,
    pub stride: usize,
}

pub fn patch_grid(width: usize, height: usize, patch: usize, stride: usize) -> Result<PatchGrid> {
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    if patch == 0 || patch > width.min(height) {
        return Err(Error::invalid(format!(
            "patch size {patch} does not fit a {width}×{height} frame"
        )));
    }
    Ok(PatchGrid {
        rows: (height - patch) / stride + 1,
        cols: (width - patch) / stride + 1,
        patch,
        stride,
    })
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn origins(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |i| (0..self.cols).map(move |j| (i * self.stride, j * self.stride)))
    }

    pub fn cell_of(&self, origin: (usize, usize)) -> (usize, usize) {
        (origin.0 / self.stride, origin.1 / self.stride)
    }
}

/// Stacks a `p×p` window of the listed channels into a `p×p×C` tensor.
pub(crate) fn stack_patch(
    frame: &Frame,
    channels: &ChannelList,
    origin: (usize, usize),
    p: usize,
    depth_shift: Option<(i32, i32, f32)>,
) -> Result<Tensor<f32>> {
    let planes: Vec<&Plane> = channels
        .ids()
        .iter()
        .map(|&c| frame.require(c))
        .collect::<Result<_>>()?;
    let c = planes.len();
    let mut data = vec![0.0f32; p * p * c];
    for (ch, (&id, plane)) in channels.ids().iter().zip(&planes).enumerate() {
        let shift = depth_shift.filter(|_| id == ChannelId::L);
        for r in 0..p {
            let row = origin.0 + r;
            for q in 0..p {
                let col = origin.1 + q;
                data[(r * p + q) * c + ch] = match shift {
                    Some((dx, dy, fill)) => shifted_value(plane, row, col, dx, dy, fill),
                    None => plane.get(row, col),
                };
            }
        }
    }
    Tensor::new(vec![p, p, c], data)
}

/// A patch and the `(row, col)` of its top-left pixel.
pub type LocatedPatch = ((usize, usize), Tensor<f32>);

pub fn extract_patches(
    frame: &Frame,
    channels: &ChannelList,
    patch: usize,
    stride: usize,
) -> Result<Vec<LocatedPatch>> {
    let grid = patch_grid(frame.width(), frame.height(), patch, stride)?;
    grid.origins()
        .map(|o| Ok((o, stack_patch(frame, channels, o, patch, None)?)))
        .collect()
}

/// True iff the population variance of `values` is at least `tau`.
pub fn variance_keep(values: &[f32], tau: f64) -> bool {
    population_variance(values) >= tau
}

pub(crate) fn population_variance(values: &[f32]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n
}

/// Adds a Rec. 601 luma channel `Gr = 0.299 R + 0.587 G + 0.114 B`.
pub fn rgb_to_gray(frame: &Frame) -> Result<Frame> {
    let r = frame.require(ChannelId::R)?;
    let g = frame.require(ChannelId::G)?;
    let b = frame.require(ChannelId::B)?;
    let gray: Vec<f32> = r
        .data()
        .iter()
        .zip(g.data())
        .zip(b.data())
        .map(|((&r, &g), &b)| (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 1.0))
        .collect();
    let mut out = frame.clone();
    out.insert(ChannelId::Gr, Plane::new(frame.width(), frame.height(), gray)?)?;
    Ok(out)
}
