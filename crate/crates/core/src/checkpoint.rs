//! Checkpoint file layout (all integers little-endian):
//!
//! ```text
//! magic          8 bytes  "MIPCKPT\0"
//! version        u32
//! header_len     u64
//! header         JSON: { "config": ModelConfig,
//!                        "params": [{ "name", "rows", "cols", "trainable" }] }
//! values         f64 LE, each parameter row-major, in header order
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MipModel, ModelConfig};
use crate::numerics::{Matrix, ParamSet};

pub const MAGIC: &[u8; 8] = b"MIPCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    rows: usize,
    cols: usize,
    trainable: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    params: Vec<ParamEntry>,
}

pub fn encode_checkpoint(model: &MipModel) -> Result<Vec<u8>> {
    let params = model.params();
    let header = Header {
        config: model.config().clone(),
        params: params
            .iter()
            .map(|p| ParamEntry {
                name: p.name.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
                trainable: p.trainable,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(20 + json.len() + 8 * params.iter().map(|p| p.value.len()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in params.iter() {
        for x in p.value.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<MipModel> {
    let corrupt = |m: &str| Error::Validation(format!("checkpoint: {m}"));
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(20..).ok_or_else(|| corrupt("truncated"))?;
    if body.len() < header_len {
        return Err(corrupt("truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[..header_len])?;
    let mut values = body[header_len..].chunks_exact(8);
    if !values.remainder().is_empty() {
        return Err(corrupt("value block is not a whole number of f64"));
    }
    let mut params = ParamSet::new();
    for e in header.params {
        let n = e.rows * e.cols;
        let data: Vec<f64> = values
            .by_ref()
            .take(n)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if data.len() != n {
            return Err(corrupt(&format!("truncated values for `{}`", e.name)));
        }
        params.add(e.name, Matrix::from_vec(e.rows, e.cols, data)?, e.trainable);
    }
    if values.next().is_some() {
        return Err(corrupt("trailing bytes"));
    }
    MipModel::from_params(header.config, params)
}

pub fn save_checkpoint(path: &Path, model: &MipModel) -> Result<()> {
    let bytes = encode_checkpoint(model)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<MipModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
