//! MMF frame files.
//!
//! Little-endian layout:
//! - magic `MMF1`
//! - u32 width, u32 height, u32 channel_count
//! - channel_count × u8 channel id (R=0 G=1 B=2 Gr=3 L=4 U=5 V=6)
//! - channel_count planes of width×height f32, row-major

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{ChannelId, Frame, Plane};

pub const MMF_MAGIC: &[u8; 4] = b"MMF1";

pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let ids = frame.channel_ids();
    let plane_bytes = frame.width() * frame.height() * 4;
    let mut out = Vec::with_capacity(16 + ids.len() * (1 + plane_bytes));
    out.extend_from_slice(MMF_MAGIC);
    out.extend_from_slice(&(frame.width() as u32).to_le_bytes());
    out.extend_from_slice(&(frame.height() as u32).to_le_bytes());
    out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
    out.extend(ids.iter().map(|&c| c as u8));
    for (_, plane) in frame.channels() {
        for v in plane.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            what: "MMF frame",
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!(
                "truncated {what}: need {n} bytes, {} left",
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_frame(bytes: &[u8]) -> Result<Frame> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MMF_MAGIC {
        cur.pos = 0;
        return Err(cur.err(format!("bad magic {magic:?}, expected \"MMF1\"")));
    }
    let width = cur.u32("width")? as usize;
    let height = cur.u32("height")? as usize;
    if width == 0 || height == 0 {
        return Err(cur.err(format!("zero frame dims {width}×{height}")));
    }
    let count = cur.u32("channel count")? as usize;
    if count > ChannelId::ALL.len() {
        return Err(cur.err(format!("channel count {count} exceeds {}", ChannelId::ALL.len())));
    }
    let mut ids = Vec::with_capacity(count);
    for _ in 0..count {
        let raw = cur.take(1, "channel id")?[0];
        let id = ChannelId::from_u8(raw).ok_or_else(|| cur.err(format!("unknown channel id {raw}")))?;
        if ids.contains(&id) {
            return Err(cur.err(format!("duplicate channel {id}")));
        }
        ids.push(id);
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| cur.err("frame dims overflow"))?;
    let mut frame = Frame::new(width, height);
    for id in ids {
        let raw = cur.take(n * 4, &format!("{id} plane"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        frame.insert(id, Plane::new(width, height, data)?)?;
    }
    if cur.pos != bytes.len() {
        return Err(cur.err(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(frame)
}

pub fn write_frame(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_frame(frame)).map_err(|e| Error::io(path, e))
}

pub fn read_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_frame(&bytes)
}
