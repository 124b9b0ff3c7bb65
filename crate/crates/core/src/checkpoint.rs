//! Binary network checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "QFATCKPT"
//! version u32      currently 1
//! hdr_len u32      length of the JSON header that follows
//! header  bytes    JSON: input dims + layer specs
//! payload f32s     per layer, in network order:
//!                    conv / linear -> latent weights
//!                    batch norm    -> gamma, beta, running mean, running var
//! digest  u64      FNV-1a over every preceding byte
//! ```
//!
//! Latent (pre-quantization) weights are stored, so a reloaded network
//! resumes training from the identical state and evaluates bit for bit
//! the same.

use crate::error::{Error, Result};
use crate::net::{Layer, LayerSpec, Network};
use crate::rng::fnv1a64;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"QFATCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    input_channels: usize,
    input_height: usize,
    input_width: usize,
    specs: Vec<LayerSpec>,
}

fn push_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn checkpoint_to_bytes(net: &Network) -> Vec<u8> {
    let (c, h, w) = net.input_dims();
    let header = CheckpointHeader {
        input_channels: c,
        input_height: h,
        input_width: w,
        specs: net.specs().to_vec(),
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for layer in net.layers() {
        match layer {
            Layer::Conv2d(conv) => push_f32s(&mut out, &conv.weight),
            Layer::Linear(fc) => push_f32s(&mut out, &fc.weight),
            Layer::BatchNorm(bn) => {
                push_f32s(&mut out, &bn.gamma);
                push_f32s(&mut out, &bn.beta);
                push_f32s(&mut out, &bn.running_mean);
                push_f32s(&mut out, &bn.running_var);
            }
            _ => {}
        }
    }
    let digest = fnv1a64(&out);
    out.extend_from_slice(&digest.to_le_bytes());
    out
}

/// Reader that tracks its byte offset so errors can name the corrupt
/// location.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "checkpoint truncated at byte {}: needed {n} bytes for {what}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn take_u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take_f32s(&mut self, dst: &mut [f32], what: &str) -> Result<()> {
        let raw = self.take(dst.len() * 4, what)?;
        for (v, chunk) in dst.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
        Ok(())
    }
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Network> {
    if bytes.len() < CHECKPOINT_MAGIC.len() + 8 {
        return Err(Error::Format(format!(
            "checkpoint too short: {} bytes",
            bytes.len()
        )));
    }
    // Digest covers everything before its own 8 bytes; check it first so
    // any payload corruption is reported as such rather than as a parse
    // error downstream.
    let body_len = bytes.len() - 8;
    let stored = u64::from_le_bytes(bytes[body_len..].try_into().expect("8 bytes"));
    let actual = fnv1a64(&bytes[..body_len]);
    if stored != actual {
        return Err(Error::Format(format!(
            "checkpoint digest mismatch: stored {stored:016x}, computed {actual:016x}"
        )));
    }
    let mut cur = Cursor {
        bytes: &bytes[..body_len],
        pos: 0,
    };
    let magic = cur.take(CHECKPOINT_MAGIC.len(), "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("bad checkpoint magic {magic:02x?}")));
    }
    let version = cur.take_u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let header_len = cur.take_u32("header length")? as usize;
    let header_bytes = cur.take(header_len, "header")?;
    let header: CheckpointHeader = serde_json::from_slice(header_bytes)
        .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    let mut net = Network::from_specs(
        header.input_channels,
        header.input_height,
        header.input_width,
        header.specs,
    )?;
    for (i, layer) in net.layers_mut().iter_mut().enumerate() {
        match layer {
            Layer::Conv2d(conv) => {
                cur.take_f32s(&mut conv.weight, &format!("layer {i} conv weights"))?
            }
            Layer::Linear(fc) => {
                cur.take_f32s(&mut fc.weight, &format!("layer {i} linear weights"))?
            }
            Layer::BatchNorm(bn) => {
                cur.take_f32s(&mut bn.gamma, &format!("layer {i} gamma"))?;
                cur.take_f32s(&mut bn.beta, &format!("layer {i} beta"))?;
                cur.take_f32s(&mut bn.running_mean, &format!("layer {i} running mean"))?;
                cur.take_f32s(&mut bn.running_var, &format!("layer {i} running var"))?;
            }
            _ => {}
        }
    }
    if cur.pos != body_len {
        return Err(Error::Format(format!(
            "checkpoint has {} unexpected trailing bytes at offset {}",
            body_len - cur.pos,
            cur.pos
        )));
    }
    Ok(net)
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_to_bytes(net))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let bytes = std::fs::read(path)?;
    checkpoint_from_bytes(&bytes)
}
