//! Minimal NIfTI-1 codec.
//!
//! Supported: little-endian single-file `.nii` (magic `n+1`) and header files
//! with magic `ni1` whose payload sits in a sibling `.img`, 3-D only, int16 or
//! float32 payloads. Orientation (qform/sform) is ignored; only `pixdim`
//! carries geometry.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{Plane, Volume};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag block of single-file images.
pub const SINGLE_FILE_OFFSET: usize = 352;

pub const DT_INT16: i16 = 4;
pub const DT_FLOAT32: i16 = 16;

const OFF_DIM: usize = 40;
const OFF_DATATYPE: usize = 70;
const OFF_BITPIX: usize = 72;
const OFF_PIXDIM: usize = 76;
const OFF_VOX_OFFSET: usize = 108;
const OFF_SCL_SLOPE: usize = 112;
const OFF_SCL_INTER: usize = 116;
const OFF_XYZT_UNITS: usize = 123;
const OFF_QFORM_CODE: usize = 252;
const OFF_SFORM_CODE: usize = 254;
const OFF_SROW_X: usize = 280;
const OFF_MAGIC: usize = 344;

/// Parsed subset of the NIfTI-1 header.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub dims: [usize; 3],
    pub pixdim: [f64; 3],
    pub datatype: i16,
    pub vox_offset: usize,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub single_file: bool,
}

fn i16_at(b: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([b[off], b[off + 1]])
}

fn i32_at(b: &[u8], off: usize) -> i32 {
    i32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn f32_at(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

/// Parses and validates the first 348 bytes.
pub fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::MalformedHeader(format!(
            "{} bytes, need {HEADER_SIZE}",
            bytes.len()
        )));
    }
    let sizeof_hdr = i32_at(bytes, 0);
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(Error::MalformedHeader(format!("sizeof_hdr = {sizeof_hdr}")));
    }
    let single_file = match &bytes[OFF_MAGIC..OFF_MAGIC + 4] {
        b"n+1\0" => true,
        b"ni1\0" => false,
        other => {
            return Err(Error::MalformedHeader(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let ndim = i16_at(bytes, OFF_DIM);
    if ndim != 3 {
        return Err(Error::MalformedHeader(format!("dim[0] = {ndim}, need 3")));
    }
    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        let v = i16_at(bytes, OFF_DIM + 2 * (i + 1));
        if v < 1 {
            return Err(Error::MalformedHeader(format!("dim[{}] = {v}", i + 1)));
        }
        *d = v as usize;
    }
    let datatype = i16_at(bytes, OFF_DATATYPE);
    let bitpix = i16_at(bytes, OFF_BITPIX);
    match (datatype, bitpix) {
        (DT_INT16, 16) | (DT_FLOAT32, 32) => {}
        (DT_INT16, _) | (DT_FLOAT32, _) => {
            return Err(Error::MalformedHeader(format!(
                "bitpix {bitpix} inconsistent with datatype {datatype}"
            )))
        }
        (other, _) => return Err(Error::UnsupportedDatatype(other)),
    }
    let mut pixdim = [0.0f64; 3];
    for (i, p) in pixdim.iter_mut().enumerate() {
        let v = f32_at(bytes, OFF_PIXDIM + 4 * (i + 1));
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::MalformedHeader(format!("pixdim[{}] = {v}", i + 1)));
        }
        *p = f64::from(v);
    }
    let vox = f32_at(bytes, OFF_VOX_OFFSET);
    let vox_offset = if single_file {
        if !(vox.is_finite() && vox >= SINGLE_FILE_OFFSET as f32 && vox < 1.0e9) {
            return Err(Error::MalformedHeader(format!("vox_offset = {vox}")));
        }
        vox as usize
    } else if vox.is_finite() && (0.0..1.0e9).contains(&vox) {
        vox as usize
    } else {
        return Err(Error::MalformedHeader(format!("vox_offset = {vox}")));
    };
    Ok(Header {
        dims,
        pixdim,
        datatype,
        vox_offset,
        scl_slope: f32_at(bytes, OFF_SCL_SLOPE),
        scl_inter: f32_at(bytes, OFF_SCL_INTER),
        single_file,
    })
}

/// Decodes a payload (already located) according to `header`.
pub fn decode_payload(header: &Header, payload: &[u8], plane: Plane) -> Result<Volume> {
    let n = header
        .dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::MalformedHeader("dims overflow".into()))?;
    let width = if header.datatype == DT_INT16 { 2 } else { 4 };
    let need = n
        .checked_mul(width)
        .ok_or_else(|| Error::MalformedHeader("payload size overflow".into()))?;
    if payload.len() < need {
        return Err(Error::MalformedHeader(format!(
            "payload has {} bytes, need {need}",
            payload.len()
        )));
    }
    let (slope, inter) = if header.scl_slope != 0.0 && header.scl_slope.is_finite() {
        (f64::from(header.scl_slope), f64::from(header.scl_inter))
    } else {
        (1.0, 0.0)
    };
    let raw: Vec<f64> = match header.datatype {
        DT_INT16 => payload[..need]
            .chunks_exact(2)
            .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])))
            .collect(),
        _ => payload[..need]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect(),
    };
    let mut data = raw;
    if slope != 1.0 || inter != 0.0 {
        for v in &mut data {
            *v = slope * *v + inter;
        }
    }
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Volume::new(header.dims, header.pixdim, plane, data)
}

/// Decodes a complete single-file image held in memory.
pub fn decode(bytes: &[u8], plane: Plane) -> Result<Volume> {
    let header = parse_header(bytes)?;
    if !header.single_file {
        return Err(Error::MalformedHeader("ni1 header has no embedded payload".into()));
    }
    let payload = bytes
        .get(header.vox_offset..)
        .ok_or_else(|| Error::MalformedHeader(format!("vox_offset {} past end of file", header.vox_offset)))?;
    decode_payload(&header, payload, plane)
}

/// Reads a `.nii` file (or a `ni1` header paired with a `.img` payload).
pub fn read_nifti(path: impl AsRef<Path>, plane: Plane) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&bytes)?;
    if header.single_file {
        return decode(&bytes, plane);
    }
    let img = path.with_extension("img");
    let payload = fs::read(&img).map_err(|e| Error::io(&img, e))?;
    let payload = payload
        .get(header.vox_offset..)
        .ok_or_else(|| Error::MalformedHeader("vox_offset past end of .img".into()))?;
    decode_payload(&header, payload, plane)
}

/// Encodes a volume as a float32 single-file image. Values outside the
/// float32 range are rejected.
pub fn encode(vol: &Volume) -> Result<Vec<u8>> {
    let dims = vol.dims();
    if dims.iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::BadGeometry(format!("dims {dims:?} exceed the NIfTI-1 limit")));
    }
    // values beyond the float32 range would be stored as infinities
    if let Some(i) = vol.data().iter().position(|v| !(*v as f32).is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let mut out = vec![0u8; SINGLE_FILE_OFFSET + 4 * vol.len()];
    out[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    out[38] = b'r';
    let dim: [i16; 8] = [3, dims[0] as i16, dims[1] as i16, dims[2] as i16, 1, 1, 1, 1];
    for (i, d) in dim.iter().enumerate() {
        out[OFF_DIM + 2 * i..OFF_DIM + 2 * i + 2].copy_from_slice(&d.to_le_bytes());
    }
    out[OFF_DATATYPE..OFF_DATATYPE + 2].copy_from_slice(&DT_FLOAT32.to_le_bytes());
    out[OFF_BITPIX..OFF_BITPIX + 2].copy_from_slice(&32i16.to_le_bytes());
    let sp = vol.spacing();
    let pixdim: [f32; 8] = [1.0, sp[0] as f32, sp[1] as f32, sp[2] as f32, 0.0, 0.0, 0.0, 0.0];
    for (i, p) in pixdim.iter().enumerate() {
        out[OFF_PIXDIM + 4 * i..OFF_PIXDIM + 4 * i + 4].copy_from_slice(&p.to_le_bytes());
    }
    out[OFF_VOX_OFFSET..OFF_VOX_OFFSET + 4].copy_from_slice(&(SINGLE_FILE_OFFSET as f32).to_le_bytes());
    out[OFF_SCL_SLOPE..OFF_SCL_SLOPE + 4].copy_from_slice(&1.0f32.to_le_bytes());
    out[OFF_SCL_INTER..OFF_SCL_INTER + 4].copy_from_slice(&0.0f32.to_le_bytes());
    // millimetres
    out[OFF_XYZT_UNITS] = 2;
    // scanner-anatomical sform holding the spacing only
    out[OFF_QFORM_CODE..OFF_QFORM_CODE + 2].copy_from_slice(&0i16.to_le_bytes());
    out[OFF_SFORM_CODE..OFF_SFORM_CODE + 2].copy_from_slice(&1i16.to_le_bytes());
    for (row, s) in sp.iter().enumerate() {
        let off = OFF_SROW_X + 16 * row + 4 * row;
        out[off..off + 4].copy_from_slice(&(*s as f32).to_le_bytes());
    }
    out[OFF_MAGIC..OFF_MAGIC + 4].copy_from_slice(b"n+1\0");
    for (chunk, v) in out[SINGLE_FILE_OFFSET..].chunks_exact_mut(4).zip(vol.data()) {
        chunk.copy_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn write_nifti(vol: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(vol)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_bytes(datatype: i16, bitpix: i16, dims: [i16; 3], pixdim: [f32; 3]) -> Vec<u8> {
        let vol = Volume::filled(
            [dims[0] as usize, dims[1] as usize, dims[2] as usize],
            [f64::from(pixdim[0]), f64::from(pixdim[1]), f64::from(pixdim[2])],
            Plane::Axial,
            0.0,
        )
        .unwrap();
        let mut bytes = encode(&vol).unwrap();
        bytes[OFF_DATATYPE..OFF_DATATYPE + 2].copy_from_slice(&datatype.to_le_bytes());
        bytes[OFF_BITPIX..OFF_BITPIX + 2].copy_from_slice(&bitpix.to_le_bytes());
        bytes
    }

    #[test]
    fn zeros_float32() {
        let bytes = header_bytes(DT_FLOAT32, 32, [4, 4, 2], [1.0, 1.0, 3.0]);
        let v = decode(&bytes, Plane::Axial).unwrap();
        assert_eq!(v.dims(), [4, 4, 2]);
        assert_eq!(v.spacing(), [1.0, 1.0, 3.0]);
        assert!(v.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn int16_scaled() {
        let mut bytes = header_bytes(DT_INT16, 16, [3, 1, 1], [1.0; 3]);
        bytes.truncate(SINGLE_FILE_OFFSET);
        for v in [-4i16, 0, 7] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes[OFF_SCL_SLOPE..OFF_SCL_SLOPE + 4].copy_from_slice(&2.0f32.to_le_bytes());
        bytes[OFF_SCL_INTER..OFF_SCL_INTER + 4].copy_from_slice(&1.0f32.to_le_bytes());
        let v = decode(&bytes, Plane::Axial).unwrap();
        assert_eq!(v.data(), &[-7.0, 1.0, 15.0]);
    }

    #[test]
    fn zero_slope_means_unscaled() {
        let mut bytes = header_bytes(DT_INT16, 16, [1, 1, 1], [1.0; 3]);
        bytes.truncate(SINGLE_FILE_OFFSET);
        bytes.extend_from_slice(&5i16.to_le_bytes());
        bytes[OFF_SCL_SLOPE..OFF_SCL_SLOPE + 4].copy_from_slice(&0.0f32.to_le_bytes());
        bytes[OFF_SCL_INTER..OFF_SCL_INTER + 4].copy_from_slice(&9.0f32.to_le_bytes());
        assert_eq!(decode(&bytes, Plane::Axial).unwrap().data(), &[5.0]);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = header_bytes(DT_FLOAT32, 32, [1, 1, 1], [1.0; 3]);
        bytes[OFF_MAGIC..OFF_MAGIC + 4].copy_from_slice(b"abc\0");
        assert!(matches!(decode(&bytes, Plane::Axial), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn unsupported_datatype() {
        let bytes = header_bytes(64, 64, [1, 1, 1], [1.0; 3]);
        assert!(matches!(
            decode(&bytes, Plane::Axial),
            Err(Error::UnsupportedDatatype(64))
        ));
    }

    #[test]
    fn nan_payload() {
        let mut bytes = header_bytes(DT_FLOAT32, 32, [2, 1, 1], [1.0; 3]);
        bytes[SINGLE_FILE_OFFSET + 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&bytes, Plane::Axial), Err(Error::NonFinite(1))));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = header_bytes(DT_FLOAT32, 32, [2, 2, 2], [1.0; 3]);
        bytes.truncate(bytes.len() - 1);
        assert!(matches!(decode(&bytes, Plane::Axial), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn short_header() {
        assert!(matches!(
            decode(&[0u8; 10], Plane::Axial),
            Err(Error::MalformedHeader(_))
        ));
    }
}
