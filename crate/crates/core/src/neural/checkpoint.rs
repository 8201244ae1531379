//! Versioned binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "FNDCKPT\0"
//! version  u32
//! hdr_len  u32
//! header   hdr_len bytes of JSON: format version, dtype, layer specs,
//!          parameter shapes, and an opaque model description
//! blobs    every parameter tensor in declaration order, row-major
//! ```
//!
//! Identical parameters always produce identical bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::LayerSpec;
use super::network::Network;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FNDCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub dtype: String,
    pub layers: Vec<LayerSpec>,
    pub shapes: Vec<Vec<usize>>,
    pub model: serde_json::Value,
}

pub fn encode<T: Real>(net: &Network<T>, model: serde_json::Value) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        version: CHECKPOINT_VERSION,
        dtype: T::DTYPE.to_string(),
        layers: net.specs().to_vec(),
        shapes: net.params().map(|p| p.value.shape().to_vec()).collect(),
        model,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + net.param_count() * size_of::<T>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in net.params() {
        for v in p.value.data() {
            v.write_le(&mut out);
        }
    }
    Ok(out)
}

pub fn decode<T: Real>(bytes: &[u8]) -> Result<(CheckpointHeader, Vec<Tensor<T>>)> {
    let bad = |reason: &str| Error::format("checkpoint", reason);
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let hdr_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16 + hdr_len).ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(body)?;
    if header.dtype != T::DTYPE {
        return Err(bad(&format!("dtype {} does not match {}", header.dtype, T::DTYPE)));
    }
    let width = size_of::<T>();
    let mut offset = 16 + hdr_len;
    let mut tensors = Vec::with_capacity(header.shapes.len());
    for shape in &header.shapes {
        let len: usize = shape.iter().product();
        let chunk = bytes
            .get(offset..offset + len * width)
            .ok_or_else(|| bad("truncated parameters"))?;
        let data = chunk.chunks_exact(width).map(T::read_le).collect();
        tensors.push(Tensor::new(shape.clone(), data)?);
        offset += len * width;
    }
    if offset != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok((header, tensors))
}

pub fn save<T: Real>(net: &Network<T>, model: serde_json::Value, path: &Path) -> Result<()> {
    fs::write(path, encode(net, model)?).map_err(|e| Error::io(path, e))
}

/// Rebuilds the network described by a checkpoint and loads its weights.
pub fn load<T: Real>(path: &Path) -> Result<(Network<T>, CheckpointHeader)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, tensors) = decode::<T>(&bytes)?;
    let mut net = Network::build(&header.layers, 0)?;
    net.restore(&tensors)?;
    Ok((net, header))
}
