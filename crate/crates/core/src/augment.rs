//! Training-time augmentations: flips, affine and gamma intensity changes,
//! and Gibbs ringing by k-space truncation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::{fft2_centered, ifft2_centered, normalized_radius};
use crate::volume::Volume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Reverses voxel order along `axis`.
pub fn flip(vol: &Volume, axis: Axis) -> Volume {
    let [nx, ny, nz] = vol.dims();
    let mut out = Vec::with_capacity(vol.len());
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let (sx, sy, sz) = match axis {
                    Axis::X => (nx - 1 - x, y, z),
                    Axis::Y => (x, ny - 1 - y, z),
                    Axis::Z => (x, y, nz - 1 - z),
                };
                out.push(vol.get(sx, sy, sz));
            }
        }
    }
    vol.with_data(out).expect("permutation keeps geometry")
}

/// `v -> a*v + b`.
pub fn intensity_affine(vol: &Volume, a: f64, b: f64) -> Result<Volume> {
    if !(a.is_finite() && a != 0.0 && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "affine scale {a} must be finite and non-zero, offset {b} finite"
        )));
    }
    vol.map(|v| a * v + b)
}

/// Power-law contrast change on the min/max-normalized range.
pub fn gamma_adjust(vol: &Volume, gamma: f64) -> Result<Volume> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} must be > 0")));
    }
    let (lo, hi) = vol.min_max();
    if hi <= lo {
        return Ok(vol.clone());
    }
    let span = hi - lo;
    vol.map(|v| lo + span * ((v - lo) / span).clamp(0.0, 1.0).powf(gamma))
}

/// Removes every k-space coefficient whose normalized radius exceeds
/// `keep_frac`, slice by slice along z. Axes shorter than two voxels carry
/// only the DC term and pass through unchanged.
pub fn gibbs_ringing(vol: &Volume, keep_frac: f64) -> Result<Volume> {
    if !(keep_frac > 0.0 && keep_frac <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep fraction {keep_frac} outside (0, 1]"
        )));
    }
    let [nx, ny, _] = vol.dims();
    if nx < 2 || ny < 2 {
        return Ok(vol.clone());
    }
    let mut slices = Vec::with_capacity(vol.dims()[2]);
    for s in vol.slices_z() {
        let mut f = fft2_centered(&s)?;
        for y in 0..ny {
            for x in 0..nx {
                if normalized_radius(x, y, nx, ny) > keep_frac {
                    f.coeffs[y * nx + x] = num_complex::Complex64::new(0.0, 0.0);
                }
            }
        }
        slices.push(ifft2_centered(&f));
    }
    vol.from_slices_like(&slices)
}

/// Probabilities and magnitude ranges for random augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub flip_prob: f64,
    pub affine_prob: f64,
    pub scale_range: [f64; 2],
    pub offset_range: [f64; 2],
    pub gamma_prob: f64,
    pub gamma_range: [f64; 2],
    pub gibbs_prob: f64,
    pub keep_frac_range: [f64; 2],
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            flip_prob: 0.5,
            affine_prob: 0.5,
            scale_range: [0.9, 1.1],
            offset_range: [-0.1, 0.1],
            gamma_prob: 0.3,
            gamma_range: [0.7, 1.5],
            gibbs_prob: 0.2,
            keep_frac_range: [0.4, 0.9],
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [self.flip_prob, self.affine_prob, self.gamma_prob, self.gibbs_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("augmentation probability outside [0, 1]".into()));
        }
        let ordered = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !ordered(self.scale_range)
            || self.scale_range[0] <= 0.0
            || !ordered(self.offset_range)
            || !ordered(self.gamma_range)
            || self.gamma_range[0] <= 0.0
            || !ordered(self.keep_frac_range)
            || self.keep_frac_range[0] <= 0.0
            || self.keep_frac_range[1] > 1.0
        {
            return Err(Error::InvalidArgument("bad augmentation range".into()));
        }
        Ok(())
    }
}

fn draw<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

/// Draws one random augmentation chain from `rng`; the draw sequence is
/// fixed so a seeded generator reproduces the same output.
pub fn random_augment<R: Rng>(vol: &Volume, cfg: &AugmentConfig, rng: &mut R) -> Result<Volume> {
    cfg.validate()?;
    let mut out = vol.clone();
    for axis in [Axis::X, Axis::Y] {
        if rng.random_bool(cfg.flip_prob) {
            out = flip(&out, axis);
        }
    }
    if rng.random_bool(cfg.affine_prob) {
        let a = draw(rng, cfg.scale_range);
        let b = draw(rng, cfg.offset_range);
        out = intensity_affine(&out, a, b)?;
    }
    if rng.random_bool(cfg.gamma_prob) {
        out = gamma_adjust(&out, draw(rng, cfg.gamma_range))?;
    }
    if rng.random_bool(cfg.gibbs_prob) {
        out = gibbs_ringing(&out, draw(rng, cfg.keep_frac_range))?;
    }
    Ok(out)
}
