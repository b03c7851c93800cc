//! Binary checkpoint layout, all integers and floats little-endian:
//!
//! ```text
//! b"HFRG" | version: u32 | layer count: u32 | layer sizes: u32 each | parameters: f64 each
//! ```
//!
//! Parameters follow the in-memory order: per layer, row-major `out x in`
//! weights, then biases.

use std::path::Path;

use super::network::Regressor;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HFRG";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint(net: &Regressor) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * net.sizes().len() + 8 * net.params().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
    for &s in net.sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<Regressor, String> {
    let mut pos = 0;
    let mut take = |n: usize| -> std::result::Result<&[u8], String> {
        let s = bytes.get(pos..pos + n).ok_or("truncated checkpoint")?;
        pos += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err("not a regressor checkpoint".into());
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let version = u32_at(take(4)?);
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let layers = u32_at(take(4)?) as usize;
    if !(2..=64).contains(&layers) {
        return Err(format!("implausible layer count {layers}"));
    }
    let mut sizes = Vec::with_capacity(layers);
    for _ in 0..layers {
        sizes.push(u32_at(take(4)?) as usize);
    }
    let count: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let raw = take(8 * count)?;
    let params = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - pos));
    }
    Regressor::from_params(&sizes, params).map_err(|e| e.to_string())
}

pub fn save_checkpoint(net: &Regressor, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Regressor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|msg| Error::Format {
        what: "checkpoint",
        path: path.to_path_buf(),
        msg,
    })
}
