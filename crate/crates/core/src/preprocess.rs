//! ROI localization, fixed-size cropping and intensity normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::volume::{LabelMask, Volume};

/// Standard-deviation floor below which z-scoring is refused.
pub const ZSCORE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub size: [usize; 3],
    #[serde(default)]
    pub pad_value: f64,
}

impl Default for PatchSpec {
    fn default() -> Self {
        PatchSpec {
            size: [192, 192, 36],
            pad_value: 0.0,
        }
    }
}

impl PatchSpec {
    pub fn new(size: [usize; 3]) -> Result<Self> {
        let spec = PatchSpec { size, pad_value: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "patch size {:?} has a zero component",
                self.size
            )));
        }
        if !self.pad_value.is_finite() {
            return Err(Error::InvalidArgument("pad value must be finite".into()));
        }
        Ok(())
    }

    /// Index inside the patch where the crop center lands.
    pub fn center_index(&self) -> [f64; 3] {
        [
            (self.size[0] / 2) as f64,
            (self.size[1] / 2) as f64,
            (self.size[2] / 2) as f64,
        ]
    }
}

/// Where intensity normalization happens relative to cropping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeOrder {
    BeforeCrop,
    #[default]
    AfterCrop,
}

/// Mean index coordinate of the positive voxels.
pub fn mask_centroid(mask: &LabelMask) -> Result<[f64; 3]> {
    let [nx, ny, _] = mask.dims();
    let mut sum = [0.0f64; 3];
    let mut count = 0usize;
    for (i, &v) in mask.data().iter().enumerate() {
        if v == 1 {
            sum[0] += (i % nx) as f64;
            sum[1] += ((i / nx) % ny) as f64;
            sum[2] += (i / (nx * ny)) as f64;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let n = count as f64;
    Ok([sum[0] / n, sum[1] / n, sum[2] / n])
}

/// Crops `spec.size` voxels around `center` (rounded to the nearest voxel).
/// Positions outside the input read `spec.pad_value`.
pub fn center_crop(vol: &Volume, center: [f64; 3], spec: &PatchSpec) -> Result<Volume> {
    spec.validate()?;
    if center.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument(format!("crop center {center:?} is not finite")));
    }
    let dims = vol.dims();
    let origin: [i64; 3] = std::array::from_fn(|a| center[a].round() as i64 - (spec.size[a] / 2) as i64);
    let mut data = Vec::with_capacity(spec.size.iter().product());
    for k in 0..spec.size[2] {
        let z = origin[2] + k as i64;
        for j in 0..spec.size[1] {
            let y = origin[1] + j as i64;
            for i in 0..spec.size[0] {
                let x = origin[0] + i as i64;
                let inside = (0..dims[0] as i64).contains(&x)
                    && (0..dims[1] as i64).contains(&y)
                    && (0..dims[2] as i64).contains(&z);
                data.push(if inside {
                    vol.get(x as usize, y as usize, z as usize)
                } else {
                    spec.pad_value
                });
            }
        }
    }
    Volume::new(spec.size, vol.spacing(), vol.plane(), data)
}

/// Percentile band `[P_lo, P_hi]` over all voxels.
pub fn percentile_band(vol: &Volume, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo >= hi {
        return Err(Error::InvalidArgument(format!(
            "percentiles must satisfy 0 <= lo < hi <= 100, got {lo}, {hi}"
        )));
    }
    let mut sorted = vol.data().to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((
        stats::percentile_sorted(&sorted, lo),
        stats::percentile_sorted(&sorted, hi),
    ))
}

/// Clips every voxel into the `[lo, hi]` percentile band of the volume.
pub fn clip_percentiles(vol: &Volume, lo: f64, hi: f64) -> Result<Volume> {
    let (p_lo, p_hi) = percentile_band(vol, lo, hi)?;
    vol.map(|v| v.clamp(p_lo, p_hi))
}

/// Zero mean, unit population standard deviation.
pub fn zscore(vol: &Volume) -> Result<Volume> {
    let mean = stats::mean(vol.data());
    let std = stats::variance(vol.data()).sqrt();
    if std <= ZSCORE_EPS {
        return Err(Error::DegenerateIntensity(std));
    }
    vol.map(|v| (v - mean) / std)
}

/// Clip to the percentile band, then z-score.
pub fn normalize(vol: &Volume, lo: f64, hi: f64) -> Result<Volume> {
    zscore(&clip_percentiles(vol, lo, hi)?)
}

/// Parameters of the patch extraction stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiConfig {
    pub patch: PatchSpec,
    pub clip_lo: f64,
    pub clip_hi: f64,
    pub order: NormalizeOrder,
}

impl Default for RoiConfig {
    fn default() -> Self {
        RoiConfig {
            patch: PatchSpec::default(),
            clip_lo: 2.5,
            clip_hi: 97.5,
            order: NormalizeOrder::AfterCrop,
        }
    }
}

/// Centroid-centered, normalized patch from a volume and its mask.
pub fn extract_roi(vol: &Volume, mask: &LabelMask, cfg: &RoiConfig) -> Result<Volume> {
    if !mask.matches(vol) {
        return Err(Error::ShapeMismatch(format!(
            "mask geometry {:?} does not match volume {:?}",
            mask.dims(),
            vol.dims()
        )));
    }
    let center = mask_centroid(mask)?;
    match cfg.order {
        NormalizeOrder::BeforeCrop => {
            let normed = normalize(vol, cfg.clip_lo, cfg.clip_hi)?;
            center_crop(&normed, center, &cfg.patch)
        }
        NormalizeOrder::AfterCrop => {
            let patch = center_crop(vol, center, &cfg.patch)?;
            normalize(&patch, cfg.clip_lo, cfg.clip_hi)
        }
    }
}
