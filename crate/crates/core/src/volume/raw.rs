//! Internal raw volume format.
//!
//! Layout (little-endian): `b"FSTG"`, `u32` nx, ny, nz, `f32` sx, sy, sz,
//! `u32` plane tag (0 unknown, 1 axial, 2 sagittal), then `nx*ny*nz` `f32`
//! values, x-fastest.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{Plane, Volume};

pub const MAGIC: &[u8; 4] = b"FSTG";
pub const HEADER_SIZE: usize = 32;

pub fn encode(vol: &Volume) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_SIZE + 4 * vol.len());
    out.extend_from_slice(MAGIC);
    for d in vol.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for s in vol.spacing() {
        out.extend_from_slice(&(s as f32).to_le_bytes());
    }
    out.extend_from_slice(&vol.plane().tag().to_le_bytes());
    for v in vol.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Volume> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::MalformedHeader(format!(
            "raw volume has {} bytes, header needs {HEADER_SIZE}",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::MalformedHeader("bad raw volume magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let dims = [word(0) as usize, word(1) as usize, word(2) as usize];
    let spacing = [
        f64::from(f32::from_bits(word(3))),
        f64::from(f32::from_bits(word(4))),
        f64::from(f32::from_bits(word(5))),
    ];
    let plane = Plane::from_tag(word(6)).ok_or_else(|| Error::MalformedHeader(format!("plane tag {}", word(6))))?;
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(4).map(|_| n))
        .ok_or_else(|| Error::MalformedHeader(format!("dims {dims:?} overflow")))?;
    let payload = &bytes[HEADER_SIZE..];
    if payload.len() != 4 * n {
        return Err(Error::MalformedHeader(format!(
            "payload has {} bytes, dims {dims:?} need {}",
            payload.len(),
            4 * n
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Volume::new(dims, spacing, plane, data).map_err(|e| match e {
        Error::BadGeometry(msg) => Error::MalformedHeader(msg),
        other => other,
    })
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_raw(vol: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(vol)).map_err(|e| Error::io(path, e))
}
