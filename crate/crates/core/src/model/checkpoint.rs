//! Model checkpoints.
//!
//! Little-endian layout:
//! - magic `MMRC`, u32 format version
//! - u32 length + UTF-8 `key=value` model config
//! - u32 channel count + one MMF channel id byte per channel
//! - u32 blob count, then per blob a u32 element count and that many f32
//!   (conv kernels and biases per stage, then dense weights and biases)

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::{ChannelId, ChannelList};
use crate::nn::{ConvLayerParams, DenseParams};
use crate::tensor::Tensor;

use super::network::{ModelConfig, Network, STAGES};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MMRC";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(network: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let config = network.config().to_key_values().to_text();
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    let ids = network.config().channels.ids();
    out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
    out.extend(ids.iter().map(|&c| c as u8));
    let blobs = network.parameter_slices();
    out.extend_from_slice(&(blobs.len() as u32).to_le_bytes());
    for blob in blobs {
        out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
        for v in blob {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            what: "checkpoint",
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!("truncated {what}")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn blob(&mut self, expected: usize) -> Result<Vec<f32>> {
        let n = self.u32("blob length")?;
        if n != expected {
            return Err(self.err(format!("blob holds {n} values, config implies {expected}")));
        }
        let raw = self.take(n * 4, "weights")?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        r.pos = 0;
        return Err(r.err("bad magic, expected \"MMRC\""));
    }
    let version = r.u32("version")? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(r.err(format!("unsupported version {version}, expected {CHECKPOINT_VERSION}")));
    }
    let len = r.u32("config length")?;
    let text = std::str::from_utf8(r.take(len, "config")?).map_err(|_| r.err("config is not UTF-8"))?;
    let config = ModelConfig::from_key_values(&text.parse()?)?;
    let count = r.u32("channel count")?;
    let raw = r.take(count, "channel ids")?;
    let ids = raw
        .iter()
        .map(|&b| ChannelId::from_u8(b).ok_or_else(|| r.err(format!("unknown channel id {b}"))))
        .collect::<Result<Vec<_>>>()?;
    if ChannelList::new(ids)? != config.channels {
        return Err(r.err("channel table disagrees with the stored config"));
    }
    let blobs = r.u32("blob count")?;
    if blobs != 2 * STAGES + 2 {
        return Err(r.err(format!("expected {} weight blobs, found {blobs}", 2 * STAGES + 2)));
    }
    let k = config.kernel_size;
    let mut convs = Vec::with_capacity(STAGES);
    let mut cin = config.channels.len();
    for &cout in &config.filters {
        let shape = [cout, k, k, cin];
        let kernels = Tensor::new(shape.to_vec(), r.blob(shape.iter().product())?)?;
        let biases = r.blob(cout)?;
        convs.push(ConvLayerParams::new(kernels, biases, 1, (k - 1) / 2)?);
        cin = cout;
    }
    let d = config.dense_inputs();
    let weights = Tensor::new(vec![config.classes, d], r.blob(config.classes * d)?)?;
    let biases = r.blob(config.classes)?;
    if r.pos != bytes.len() {
        return Err(r.err(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Network::from_parts(config, convs, DenseParams::new(weights, biases)?)
}

pub fn save_checkpoint(network: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(network)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Rejects inference on patches stacked in a different channel order than
/// the network was trained on.
pub fn check_channels(network: &Network, channels: &ChannelList) -> Result<()> {
    if &network.config().channels != channels {
        return Err(Error::invalid(format!(
            "model expects channels {} but the data provides {}",
            network.config().channels,
            channels
        )));
    }
    Ok(())
}
