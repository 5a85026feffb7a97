//! `PCSW1` named-tensor container.
//!
//! Layout: the 5 magic bytes `PCSW1`, a little-endian `u64` header length,
//! a UTF-8 JSON header, then the payload of little-endian `f64` values.
//! The header carries a free-form `descriptor` object and one entry per
//! tensor with its name, shape, dtype and byte range within the payload.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 5] = b"PCSW1";

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: usize,
    nbytes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    descriptor: serde_json::Value,
    tensors: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensors {
    pub descriptor: serde_json::Value,
    pub tensors: Vec<(String, Tensor)>,
}

impl NamedTensors {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

pub fn encode(descriptor: &serde_json::Value, tensors: &[(String, Tensor)]) -> Vec<u8> {
    let mut offset = 0;
    let entries = tensors
        .iter()
        .map(|(name, t)| {
            let e = Entry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                dtype: "f64".into(),
                offset,
                nbytes: t.len() * 8,
            };
            offset += e.nbytes;
            e
        })
        .collect();
    let header = serde_json::to_vec(&Header {
        descriptor: descriptor.clone(),
        tensors: entries,
    })
    .expect("header serializes");
    let mut out = Vec::with_capacity(MAGIC.len() + 8 + header.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, t) in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn corrupt<T>(msg: impl Into<String>) -> Result<T> {
    Err(NnError::Corrupt(msg.into()))
}

pub fn decode(bytes: &[u8]) -> Result<NamedTensors> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return corrupt("missing PCSW1 magic");
    }
    let rest = &bytes[MAGIC.len()..];
    if rest.len() < 8 {
        return corrupt("truncated before header length");
    }
    let hlen = u64::from_le_bytes(rest[..8].try_into().expect("8 bytes")) as usize;
    let rest = &rest[8..];
    if rest.len() < hlen {
        return corrupt(format!("header declares {hlen} bytes, {} available", rest.len()));
    }
    let header: Header = serde_json::from_slice(&rest[..hlen])
        .map_err(|e| NnError::Corrupt(format!("header is not valid JSON: {e}")))?;
    let payload = &rest[hlen..];
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for e in header.tensors {
        if e.dtype != "f64" {
            return corrupt(format!("tensor '{}' has unsupported dtype {}", e.name, e.dtype));
        }
        let n: usize = e.shape.iter().product();
        if n * 8 != e.nbytes {
            return corrupt(format!("tensor '{}' byte count disagrees with shape", e.name));
        }
        let end = e.offset.checked_add(e.nbytes).filter(|&end| end <= payload.len());
        let Some(end) = end else {
            return corrupt(format!(
                "tensor '{}' extends past end of payload ({} bytes)",
                e.name,
                payload.len()
            ));
        };
        let data = payload[e.offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push((e.name, Tensor::new(e.shape, data)?));
    }
    Ok(NamedTensors {
        descriptor: header.descriptor,
        tensors,
    })
}

pub fn save(
    path: impl AsRef<Path>,
    descriptor: &serde_json::Value,
    tensors: &[(String, Tensor)],
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(descriptor, tensors))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<NamedTensors> {
    decode(&std::fs::read(path)?)
}
