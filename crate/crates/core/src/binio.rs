//! Little-endian `f32` payload helpers shared by every on-disk format.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn f32s_to_bytes(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes exactly `expected` floats from `bytes`.
pub(crate) fn bytes_to_f32s(bytes: &[u8], expected: usize, path: &Path) -> Result<Vec<f32>> {
    if bytes.len() != expected * 4 {
        return Err(Error::format(
            path,
            format!(
                "expected {} bytes ({} floats), found {} bytes",
                expected * 4,
                expected,
                bytes.len()
            ),
        ));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(path, format!("non-finite value at float index {i}")));
    }
    Ok(values)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline; field order follows the struct.
pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

/// `magic ‖ u32 LE header length ‖ header ‖ payload`.
pub(crate) fn encode_container(magic: &[u8], header: &[u8], payload: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(magic.len() + 4 + header.len() + 4 * payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header);
    out.extend(f32s_to_bytes(payload));
    out
}

/// Splits a container into its header and raw payload bytes.
pub(crate) fn decode_container<'a>(bytes: &'a [u8], magic: &[u8], path: &Path) -> Result<(&'a [u8], &'a [u8])> {
    let m = magic.len();
    if bytes.len() < m + 4 || &bytes[..m] != magic {
        return Err(Error::format(
            path,
            format!("missing {} magic", String::from_utf8_lossy(magic)),
        ));
    }
    let hlen = u32::from_le_bytes([bytes[m], bytes[m + 1], bytes[m + 2], bytes[m + 3]]) as usize;
    let header = bytes
        .get(m + 4..m + 4 + hlen)
        .ok_or_else(|| Error::format(path, "truncated header"))?;
    Ok((header, &bytes[m + 4 + hlen..]))
}
