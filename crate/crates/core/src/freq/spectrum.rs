use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::volume::Slice2d;

/// DC-centered complex spectrum of one slice, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySlice {
    pub width: usize,
    pub height: usize,
    pub coeffs: Vec<Complex64>,
}

impl FrequencySlice {
    pub fn zeros(width: usize, height: usize) -> Self {
        FrequencySlice {
            width,
            height,
            coeffs: vec![Complex64::new(0.0, 0.0); width * height],
        }
    }

    pub fn dc(&self) -> Complex64 {
        self.coeffs[(self.height / 2) * self.width + self.width / 2]
    }

    /// `sum |c|^2`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Normalized radial distance of matrix position `(x, y)` from the DC bin.
pub fn normalized_radius(x: usize, y: usize, width: usize, height: usize) -> f64 {
    let fx = (x as f64 - (width / 2) as f64) / (width as f64 / 2.0);
    let fy = (y as f64 - (height / 2) as f64) / (height as f64 / 2.0);
    (fx * fx + fy * fy).sqrt() / std::f64::consts::SQRT_2
}

fn fft_2d(data: &mut [Complex64], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    row.process(data);
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[y * width + x];
        }
        col.process(&mut column);
        for y in 0..height {
            data[y * width + x] = column[y];
        }
    }
}

/// Moves index 0 to the center (`shift = n/2`) or back (`shift = n - n/2`).
fn roll(data: &[Complex64], width: usize, height: usize, sx: usize, sy: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for y in 0..height {
        let ty = (y + sy) % height;
        for x in 0..width {
            out[ty * width + (x + sx) % width] = data[y * width + x];
        }
    }
    out
}

pub fn fft2_centered(slice: &Slice2d) -> Result<FrequencySlice> {
    let (w, h) = (slice.width, slice.height);
    if w < 2 || h < 2 {
        return Err(Error::BadGeometry(format!("{w}x{h} slice is too small for a 2-D FFT")));
    }
    let mut data: Vec<Complex64> = slice.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_2d(&mut data, w, h, false);
    Ok(FrequencySlice {
        width: w,
        height: h,
        coeffs: roll(&data, w, h, w / 2, h / 2),
    })
}

/// Inverse transform keeping the complex result (scaled by `1/(W*H)`).
pub fn ifft2_complex(freq: &FrequencySlice) -> Vec<Complex64> {
    let (w, h) = (freq.width, freq.height);
    let mut data = roll(&freq.coeffs, w, h, w - w / 2, h - h / 2);
    fft_2d(&mut data, w, h, true);
    let scale = 1.0 / (w * h) as f64;
    for c in &mut data {
        *c *= scale;
    }
    data
}

/// Real part of the inverse transform.
pub fn ifft2_centered(freq: &FrequencySlice) -> Slice2d {
    Slice2d {
        width: freq.width,
        height: freq.height,
        data: ifft2_complex(freq).into_iter().map(|c| c.re).collect(),
    }
}

fn check_perturb(radius_frac: f64, gain: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&radius_frac) {
        return Err(Error::InvalidArgument(format!(
            "radius fraction {radius_frac} outside [0, 1]"
        )));
    }
    if !(gain.is_finite() && gain > 0.0) {
        return Err(Error::InvalidArgument(format!("gain {gain} must be positive")));
    }
    Ok(())
}

/// Multiplies every coefficient inside the centered disk of normalized radius
/// `radius_frac` by `gain`.
pub fn perturb(freq: &FrequencySlice, radius_frac: f64, gain: f64) -> Result<FrequencySlice> {
    check_perturb(radius_frac, gain)?;
    let mut out = freq.clone();
    for y in 0..freq.height {
        for x in 0..freq.width {
            if normalized_radius(x, y, freq.width, freq.height) <= radius_frac {
                out.coeffs[y * freq.width + x] *= gain;
            }
        }
    }
    Ok(out)
}

/// Like [`perturb`], but the gain falls off to 1 with a raised-cosine edge
/// of normalized width `taper` outside the disk.
pub fn perturb_tapered(freq: &FrequencySlice, radius_frac: f64, gain: f64, taper: f64) -> Result<FrequencySlice> {
    if taper <= 0.0 {
        return perturb(freq, radius_frac, gain);
    }
    check_perturb(radius_frac, gain)?;
    let mut out = freq.clone();
    for y in 0..freq.height {
        for x in 0..freq.width {
            let r = normalized_radius(x, y, freq.width, freq.height);
            let weight = if r <= radius_frac {
                1.0
            } else if r < radius_frac + taper {
                0.5 * (1.0 + (std::f64::consts::PI * (r - radius_frac) / taper).cos())
            } else {
                continue;
            };
            out.coeffs[y * freq.width + x] *= 1.0 + (gain - 1.0) * weight;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub n_variants: usize,
    /// Sampling range of the disk radius (normalized units).
    pub radius_frac_range: [f64; 2],
    /// Sampling range of the gain, drawn log-uniformly.
    pub gain_range: [f64; 2],
    /// Raised-cosine edge width; 0 gives a hard-edged disk.
    pub taper: f64,
    pub rng_seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            n_variants: 200,
            radius_frac_range: [0.05, 0.6],
            gain_range: [0.5, 2.0],
            taper: 0.0,
            rng_seed: 0,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        let [r0, r1] = self.radius_frac_range;
        let [g0, g1] = self.gain_range;
        if self.n_variants == 0 {
            return Err(Error::InvalidArgument("n_variants must be >= 1".into()));
        }
        if !(r0 > 0.0 && r0 <= r1 && r1 <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "radius range {:?} must lie in (0, 1]",
                self.radius_frac_range
            )));
        }
        if !(g0 > 0.0 && g0 <= g1 && g1.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gain range {:?} must be positive",
                self.gain_range
            )));
        }
        if !(self.taper >= 0.0 && self.taper.is_finite()) {
            return Err(Error::InvalidArgument("taper must be >= 0".into()));
        }
        Ok(())
    }
}

/// One sampled perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub radius_frac: f64,
    pub gain: f64,
}

/// The `n_variants` seeded draws; draw `i` uses stream `i` of the seed.
pub fn variant_params(cfg: &PerturbationConfig) -> Result<Vec<Variant>> {
    cfg.validate()?;
    let [r0, r1] = cfg.radius_frac_range;
    let (l0, l1) = (cfg.gain_range[0].ln(), cfg.gain_range[1].ln());
    Ok((0..cfg.n_variants)
        .map(|i| {
            let mut rng = rng::stream(cfg.rng_seed, i as u64);
            let radius_frac = if r1 > r0 { rng.random_range(r0..=r1) } else { r0 };
            let gain = if l1 > l0 {
                rng.random_range(l0..=l1).exp()
            } else {
                l0.exp()
            };
            Variant { radius_frac, gain }
        })
        .collect())
}

/// Perturbed copies of `slice`, one per sampled `(radius, gain)` draw.
pub fn generate_variants(slice: &Slice2d, cfg: &PerturbationConfig) -> Result<Vec<Slice2d>> {
    let spectrum = fft2_centered(slice)?;
    variant_params(cfg)?
        .par_iter()
        .map(|v| perturb_tapered(&spectrum, v.radius_frac, v.gain, cfg.taper).map(|f| ifft2_centered(&f)))
        .collect()
}
