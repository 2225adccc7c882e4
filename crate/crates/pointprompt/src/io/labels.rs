//! Per-point label files: "SP3D", u32 version, u32 N, N × u32 (LE).

use std::fs;
use std::path::Path;

use crate::error::{Error, IoContext, Result};

pub const LABELS_MAGIC: &[u8; 4] = b"SP3D";
pub const LABELS_VERSION: u32 = 1;

pub fn encode_labels(labels: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * labels.len());
    out.extend_from_slice(LABELS_MAGIC);
    out.extend_from_slice(&LABELS_VERSION.to_le_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    for l in labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<u32>> {
    if bytes.len() < 12 || &bytes[..4] != LABELS_MAGIC {
        return Err(Error::data("not a label file"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != LABELS_VERSION {
        return Err(Error::data(format!(
            "unsupported label file version {version}"
        )));
    }
    let n = word(8) as usize;
    if bytes.len() != 12 + 4 * n {
        return Err(Error::data(format!(
            "label file declares {n} labels but holds {} bytes",
            bytes.len()
        )));
    }
    Ok((0..n).map(|i| word(12 + 4 * i)).collect())
}

pub fn write_labels(path: &Path, labels: &[u32]) -> Result<()> {
    fs::write(path, encode_labels(labels)).at(path)
}

pub fn read_labels(path: &Path) -> Result<Vec<u32>> {
    let bytes = fs::read(path).at(path)?;
    decode_labels(&bytes).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}
