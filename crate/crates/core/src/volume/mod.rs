//! Scalar volumes, binary masks and their on-disk codecs.

pub mod nifti;
pub mod raw;
mod resample;

pub use resample::resample_trilinear;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Acquisition plane of a volume. Supplied by the dataset manifest, never
/// inferred from header geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Axial,
    Sagittal,
    Unknown,
}

impl Plane {
    pub fn as_str(self) -> &'static str {
        match self {
            Plane::Axial => "axial",
            Plane::Sagittal => "sagittal",
            Plane::Unknown => "unknown",
        }
    }

    pub(crate) fn tag(self) -> u32 {
        match self {
            Plane::Unknown => 0,
            Plane::Axial => 1,
            Plane::Sagittal => 2,
        }
    }

    pub(crate) fn from_tag(tag: u32) -> Option<Plane> {
        match tag {
            0 => Some(Plane::Unknown),
            1 => Some(Plane::Axial),
            2 => Some(Plane::Sagittal),
            _ => None,
        }
    }
}

impl std::str::FromStr for Plane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "axial" => Ok(Plane::Axial),
            "sagittal" => Ok(Plane::Sagittal),
            "unknown" => Ok(Plane::Unknown),
            other => Err(Error::InvalidArgument(format!("unknown plane {other:?}"))),
        }
    }
}

impl std::fmt::Display for Plane {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_geometry(dims: [usize; 3], spacing: [f64; 3], len: usize) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::BadGeometry(format!("zero dimension in {dims:?}")));
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::BadGeometry(format!("dims {dims:?} overflow")))?;
    if n != len {
        return Err(Error::BadGeometry(format!(
            "payload has {len} values, dims {dims:?} need {n}"
        )));
    }
    if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(Error::BadGeometry(format!("spacing {spacing:?} not positive")));
    }
    Ok(())
}

/// A 3-D scalar grid stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    spacing: [f64; 3],
    plane: Plane,
    data: Vec<f64>,
}

impl Volume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], plane: Plane, data: Vec<f64>) -> Result<Self> {
        check_geometry(dims, spacing, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Volume {
            dims,
            spacing,
            plane,
            data,
        })
    }

    pub fn filled(dims: [usize; 3], spacing: [f64; 3], plane: Plane, value: f64) -> Result<Self> {
        let n = dims.iter().product();
        Volume::new(dims, spacing, plane, vec![value; n])
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel.
    pub fn from_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        plane: Plane,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.iter().product());
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Volume::new(dims, spacing, plane, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    pub fn with_plane(mut self, plane: Plane) -> Self {
        self.plane = plane;
        self
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(x, y, z)]
    }

    /// Same geometry, new payload. The payload must be finite.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Volume::new(self.dims, self.spacing, self.plane, data)
    }

    /// Elementwise map; the closure must keep values finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn slice_z(&self, z: usize) -> Slice2d {
        let n = self.dims[0] * self.dims[1];
        Slice2d {
            width: self.dims[0],
            height: self.dims[1],
            data: self.data[z * n..(z + 1) * n].to_vec(),
        }
    }

    pub fn slices_z(&self) -> Vec<Slice2d> {
        (0..self.dims[2]).map(|z| self.slice_z(z)).collect()
    }

    /// Reassembles a volume from z slices, keeping this volume's geometry.
    pub fn from_slices_like(&self, slices: &[Slice2d]) -> Result<Self> {
        if slices.len() != self.dims[2]
            || slices
                .iter()
                .any(|s| s.width != self.dims[0] || s.height != self.dims[1])
        {
            return Err(Error::ShapeMismatch("slices do not match the volume geometry".into()));
        }
        self.with_data(slices.iter().flat_map(|s| s.data.iter().copied()).collect())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Binary mask sharing the geometry of a paired [`Volume`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<u8>,
}

impl LabelMask {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<u8>) -> Result<Self> {
        check_geometry(dims, spacing, data.len())?;
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(Error::InvalidArgument(format!(
                "mask value {} at voxel {i} is not binary",
                data[i]
            )));
        }
        Ok(LabelMask { dims, spacing, data })
    }

    /// Thresholds a volume at 0.5; used when masks travel through the volume
    /// codecs.
    pub fn from_volume(vol: &Volume) -> Self {
        LabelMask {
            dims: vol.dims,
            spacing: vol.spacing,
            data: vol.data.iter().map(|&v| u8::from(v >= 0.5)).collect(),
        }
    }

    pub fn to_volume(&self, plane: Plane) -> Volume {
        Volume {
            dims: self.dims,
            spacing: self.spacing,
            plane,
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    /// Checks that the mask can be paired with `vol`.
    pub fn matches(&self, vol: &Volume) -> bool {
        self.dims == vol.dims && self.spacing == vol.spacing
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }
}

/// A single 2-D real slice, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice2d {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Slice2d {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != data.len() {
            return Err(Error::BadGeometry(format!(
                "{width}x{height} slice with {} values",
                data.len()
            )));
        }
        Ok(Slice2d { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Slice2d {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mse(&self, other: &Slice2d) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / self.data.len() as f64
    }
}
