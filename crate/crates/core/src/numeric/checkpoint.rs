//! Sectioned binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   b"TOPOLSTM"
//! version    u32       1
//! header_len u64       length of the JSON header in bytes
//! header     JSON      {"meta": <caller metadata>, "slots": [{"name", "rows", "cols"}, ...]}
//! payload    f64 LE    every slot in header order, row-major
//! ```
//!
//! Floats are written as raw IEEE-754 bits, so save/load is bit-exact.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Matrix, ParameterStore};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TOPOLSTM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct SlotHeader {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    slots: Vec<SlotHeader>,
}

pub fn write_checkpoint<W: Write>(
    mut out: W,
    meta: &serde_json::Value,
    params: &ParameterStore,
) -> Result<()> {
    let header = Header {
        meta: meta.clone(),
        slots: params
            .slots()
            .iter()
            .map(|s| SlotHeader {
                name: s.name.clone(),
                rows: s.value.rows(),
                cols: s.value.cols(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for slot in params.slots() {
        let mut buf = Vec::with_capacity(slot.value.as_slice().len() * 8);
        for x in slot.value.as_slice() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(serde_json::Value, ParameterStore)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = usize::try_from(u64::from_le_bytes(len))
        .map_err(|_| Error::Checkpoint("header too large".into()))?;
    let mut json = vec![0u8; len];
    input.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;

    let mut params = ParameterStore::new();
    for s in header.slots {
        let n = s.rows * s.cols;
        let mut bytes = vec![0u8; n * 8];
        input
            .read_exact(&mut bytes)
            .map_err(|e| Error::Checkpoint(format!("slot `{}` truncated: {e}", s.name)))?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        params.push(s.name, Matrix::from_vec(s.rows, s.cols, values)?)?;
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after payload",
            rest.len()
        )));
    }
    Ok((header.meta, params))
}
