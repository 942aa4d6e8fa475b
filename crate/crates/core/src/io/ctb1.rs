//! `CTB1` clip-feature files: the magic `CTB1`, `T` and `D` as little-endian
//! `u32`, then `T·D` little-endian `f32` values in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::ClipEmbeddings;

pub const MAGIC: &[u8; 4] = b"CTB1";
const HEADER_LEN: usize = 12;

/// Serializes embeddings, rounding each value to `f32`.
pub fn encode(emb: &ClipEmbeddings) -> std::result::Result<Vec<u8>, String> {
    let t = u32::try_from(emb.clips()).map_err(|_| "clip count exceeds u32".to_string())?;
    let d = u32::try_from(emb.dim()).map_err(|_| "dimension exceeds u32".to_string())?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * emb.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&t.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    for (i, &v) in emb.as_slice().iter().enumerate() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(format!("value {v} at index {i} does not fit in f32"));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> std::result::Result<ClipEmbeddings, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("file is {} bytes, shorter than the 12-byte header", bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return Err(format!("bad magic {:?}, expected \"CTB1\"", String::from_utf8_lossy(&bytes[..4])));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (t, d) = (word(4), word(8));
    let expected = t
        .checked_mul(d)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| format!("header T={t} D={d} overflows"))?;
    if bytes.len() != expected {
        return Err(format!(
            "length {} does not match header T={t} D={d} (expected {expected})",
            bytes.len()
        ));
    }
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    ClipEmbeddings::new(t, d, data).map_err(|e| e.to_string())
}

pub fn read_ctb1(path: impl AsRef<Path>) -> Result<ClipEmbeddings> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

pub fn write_ctb1(path: impl AsRef<Path>, emb: &ClipEmbeddings) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(emb).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
