//! `.mgc` checkpoint container.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{read_preamble, write_atomic, write_preamble, Cursor, IoError};
use crate::recognizer::ModelParams;

pub const MAGIC: &[u8; 4] = b"MGXC";
pub const VERSION: u32 = 1;
const HASH_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub hidden: usize,
    pub temperature: f64,
    pub tensors: usize,
}

fn push_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f32]) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(shape.len() as u8);
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(params: &ModelParams<f32>) -> Vec<u8> {
    let buffers = params.buffers();
    let tensors = params.tensors();
    let header = CheckpointHeader {
        hidden: params.hidden(),
        temperature: params.temperature as f64,
        tensors: buffers.len() + tensors.len(),
    };
    let mut out = Vec::new();
    write_preamble(&mut out, MAGIC, VERSION, &serde_json::to_value(header).unwrap());
    for (name, shape, data) in buffers.iter().chain(tensors.iter()) {
        push_tensor(&mut out, name, shape, data);
    }
    let hash = Sha256::digest(&out);
    out.extend_from_slice(&hash);
    out
}

/// Decodes a checkpoint. With `expected_hidden`, a checkpoint of another
/// width is rejected.
pub fn decode_checkpoint(bytes: &[u8], expected_hidden: Option<usize>) -> Result<ModelParams<f32>, IoError> {
    if bytes.len() < HASH_LEN {
        return Err(IoError::HashMismatch);
    }
    let (body, hash) = bytes.split_at(bytes.len() - HASH_LEN);
    if Sha256::digest(body).as_slice() != hash {
        return Err(IoError::HashMismatch);
    }
    let mut cur = Cursor::new(body);
    let header: CheckpointHeader = read_preamble(&mut cur, MAGIC, "checkpoint", VERSION)?;
    if let Some(h) = expected_hidden {
        if h != header.hidden {
            return Err(IoError::ShapeMismatch(format!("hidden {} in file, expected {h}", header.hidden)));
        }
    }
    let mut params = ModelParams::<f32>::zeros(header.hidden);
    params.temperature = header.temperature as f32;
    let expected: Vec<(&'static str, Vec<usize>)> = params
        .buffers()
        .iter()
        .chain(params.tensors().iter())
        .map(|(n, s, _)| (*n, s.clone()))
        .collect();
    if header.tensors != expected.len() {
        return Err(IoError::ShapeMismatch(format!(
            "{} tensors in file, expected {}",
            header.tensors,
            expected.len()
        )));
    }
    let mut values: Vec<Vec<f32>> = Vec::with_capacity(expected.len());
    for (index, (want_name, want_shape)) in expected.iter().enumerate() {
        let corrupt = |reason: &str| IoError::CorruptRecord {
            index,
            reason: reason.to_string(),
        };
        let len = cur.u16().ok_or_else(|| corrupt("truncated"))? as usize;
        let name = cur.take(len).ok_or_else(|| corrupt("truncated"))?;
        if name != want_name.as_bytes() {
            return Err(IoError::ShapeMismatch(format!(
                "tensor {index} is {:?}, expected {want_name}",
                String::from_utf8_lossy(name)
            )));
        }
        let ndim = cur.u8().ok_or_else(|| corrupt("truncated"))? as usize;
        let shape = (0..ndim)
            .map(|_| cur.u32().map(|d| d as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| corrupt("truncated"))?;
        if &shape != want_shape {
            return Err(IoError::ShapeMismatch(format!("{want_name}: {shape:?} in file, expected {want_shape:?}")));
        }
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| cur.f32())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| corrupt("truncated"))?;
        values.push(data);
    }
    if cur.remaining() != 0 {
        return Err(IoError::CorruptRecord {
            index: expected.len(),
            reason: "trailing bytes".into(),
        });
    }
    let (buf_vals, tensor_vals) = values.split_at(2);
    for ((_, dst), src) in params.buffers_mut().into_iter().zip(buf_vals) {
        dst.copy_from_slice(src);
    }
    for ((_, dst), src) in params.tensors_mut().into_iter().zip(tensor_vals) {
        dst.copy_from_slice(src);
    }
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParams<f32>, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &encode_checkpoint(params))
}

pub fn load_checkpoint(path: &Path, expected_hidden: Option<usize>) -> Result<ModelParams<f32>, IoError> {
    decode_checkpoint(&std::fs::read(path)?, expected_hidden)
}
