//! Deterministic synthetic pelvic-like volumes with planted EVI and MFI
//! signatures, per-site contrast shifts and stratified splitting.
//!
//! Anatomy is an elliptical "rectum" tube along z: dark lumen, bright wall,
//! textured background. EVI-positive cases carry a bright serpiginous vessel
//! outside the wall; MFI-positive cases carry a thick bright ring abutting
//! the wall. The sagittal view is a reslice of the same anatomy with its own
//! noise.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::{fft2_centered, ifft2_centered, perturb};
use crate::rng;
use crate::volume::{LabelMask, Plane, Volume};

/// Fixed `(radius, gain)` frequency perturbation per site; site 0 is the
/// reference scanner.
pub const SITE_TABLE: [(f64, f64); 6] = [
    (0.3, 1.0),
    (0.25, 1.6),
    (0.4, 0.65),
    (0.15, 1.35),
    (0.5, 0.8),
    (0.2, 2.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub n_patients: usize,
    pub evi_rate: f64,
    pub mfi_rate: f64,
    /// Axial volume dims; the sagittal view is `[ny, nz, nx]`.
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub seed: u64,
    pub n_sites: usize,
    /// Intensity of the planted signatures above the wall.
    pub contrast: f64,
    pub noise_sigma: f64,
    pub apply_site_shift: bool,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            n_patients: 60,
            evi_rate: 0.311,
            mfi_rate: 0.236,
            dims: [64, 64, 16],
            spacing: [1.0, 1.0, 3.0],
            seed: 0,
            n_sites: 2,
            contrast: 1.0,
            noise_sigma: 0.1,
            apply_site_shift: true,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients < 4 {
            return Err(Error::InvalidArgument("phantom needs at least 4 patients".into()));
        }
        if !(0.0..=1.0).contains(&self.evi_rate) || !(0.0..=1.0).contains(&self.mfi_rate) {
            return Err(Error::InvalidArgument("label rates must lie in [0, 1]".into()));
        }
        if self.dims.iter().any(|&d| d < 8) {
            return Err(Error::BadGeometry(format!("phantom dims {:?} below 8", self.dims)));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::BadGeometry("phantom spacing must be positive".into()));
        }
        if self.n_sites == 0 || self.n_sites > SITE_TABLE.len() {
            return Err(Error::InvalidArgument(format!(
                "n_sites must be in 1..={}",
                SITE_TABLE.len()
            )));
        }
        if !(self.contrast >= 0.0 && self.contrast.is_finite())
            || !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite())
        {
            return Err(Error::InvalidArgument("contrast and noise must be >= 0".into()));
        }
        Ok(())
    }

    /// Number of positives for a rate, rounded half away from zero.
    pub fn positives(&self, rate: f64) -> usize {
        (self.n_patients as f64 * rate).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomCase {
    pub id: String,
    pub axial: Volume,
    pub sagittal: Volume,
    pub axial_mask: LabelMask,
    pub sagittal_mask: LabelMask,
    pub evi: u8,
    pub mfi: u8,
    pub site: usize,
}

struct Anatomy {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    vessel_theta: f64,
    vessel_phase: f64,
    vessel_swing: f64,
    texture: [f64; 3],
}

fn label_vector(n: usize, positives: usize, rng: &mut rng::Rng) -> Vec<u8> {
    let mut v: Vec<u8> = (0..n).map(|i| u8::from(i < positives)).collect();
    v.shuffle(rng);
    v
}

/// Noise-free axial intensity and mask membership of voxel `(x, y, z)`.
fn voxel(spec: &PhantomSpec, an: &Anatomy, evi: bool, mfi: bool, x: usize, y: usize, z: usize) -> (f64, bool) {
    let nz = spec.dims[2];
    let (fx, fy) = (x as f64, y as f64);
    let dx = (fx - an.cx) / an.a;
    let dy = (fy - an.cy) / an.b;
    let r = (dx * dx + dy * dy).sqrt();
    let t = an.texture;
    let mut v = 0.45 + 0.05 * (t[0] * fx + t[1] * fy + t[2] * z as f64).sin();
    let inside = r < 1.0;
    if r < 0.6 {
        v = 0.25;
    } else if inside {
        v = 0.9;
    } else if mfi && r < 1.4 {
        v = 0.9 + 0.8 * spec.contrast;
    }
    if evi {
        // a wiggling arc band over a third of the circumference, outside
        // the wall and any MFI ring
        let phi = dy.atan2(dx);
        let mut dphi = (phi - an.vessel_theta).rem_euclid(std::f64::consts::TAU);
        if dphi > std::f64::consts::PI {
            dphi -= std::f64::consts::TAU;
        }
        let zf = z as f64 / nz as f64;
        let centre = 1.75 + 0.15 * an.vessel_swing * (3.0 * phi + std::f64::consts::TAU * zf + an.vessel_phase).sin();
        if dphi.abs() < 1.05 && (r - centre).abs() < 0.12 {
            v = v.max(0.9 + spec.contrast);
        }
    }
    (v, inside)
}

/// Axial view resliced to sagittal: `sag[y, z, x] = ax[x, y, z]`.
fn reslice<T: Copy>(data: &[T], dims: [usize; 3]) -> Vec<T> {
    let [nx, ny, nz] = dims;
    let mut out = Vec::with_capacity(data.len());
    for x in 0..nx {
        for z in 0..nz {
            for y in 0..ny {
                out.push(data[(z * ny + y) * nx + x]);
            }
        }
    }
    out
}

fn make_case(spec: &PhantomSpec, index: usize, evi: u8, mfi: u8) -> Result<PhantomCase> {
    let mut r = rng::stream(spec.seed, index as u64 + 1);
    let [nx, ny, nz] = spec.dims;
    let an = Anatomy {
        cx: nx as f64 / 2.0 + r.random_range(-2.0..2.0),
        cy: ny as f64 / 2.0 + r.random_range(-2.0..2.0),
        a: 0.18 * nx as f64 * r.random_range(0.9..1.1),
        b: 0.15 * ny as f64 * r.random_range(0.9..1.1),
        vessel_theta: r.random_range(0.0..std::f64::consts::TAU),
        vessel_phase: r.random_range(0.0..std::f64::consts::TAU),
        vessel_swing: r.random_range(0.5..1.0),
        texture: [
            r.random_range(0.1..0.5),
            r.random_range(0.1..0.5),
            r.random_range(0.1..0.5),
        ],
    };
    let site = r.random_range(0..spec.n_sites);
    let n = nx * ny * nz;
    let mut clean = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let (v, m) = voxel(spec, &an, evi == 1, mfi == 1, x, y, z);
                clean.push(v);
                mask.push(u8::from(m));
            }
        }
    }
    let normal = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut noisy = |data: &[f64]| -> Vec<f64> {
        data.iter()
            .map(|v| {
                if spec.noise_sigma > 0.0 {
                    v + normal.sample(&mut r)
                } else {
                    *v
                }
            })
            .collect()
    };
    let ax_data = noisy(&clean);
    let sag_data = noisy(&reslice(&clean, spec.dims));
    let [sx, sy, sz] = spec.spacing;
    let mut axial = Volume::new(spec.dims, spec.spacing, Plane::Axial, ax_data)?;
    let mut sagittal = Volume::new([ny, nz, nx], [sy, sz, sx], Plane::Sagittal, sag_data)?;
    if spec.apply_site_shift {
        axial = simulate_site_shift(&axial, site, spec.n_sites)?;
        sagittal = simulate_site_shift(&sagittal, site, spec.n_sites)?;
    }
    let axial_mask = LabelMask::new(spec.dims, spec.spacing, mask.clone())?;
    let sagittal_mask = LabelMask::new([ny, nz, nx], [sy, sz, sx], reslice(&mask, spec.dims))?;
    Ok(PhantomCase {
        id: format!("P{:04}", index + 1),
        axial,
        sagittal,
        axial_mask,
        sagittal_mask,
        evi,
        mfi,
        site,
    })
}

/// Generates the dataset; identical specs give identical output.
pub fn generate(spec: &PhantomSpec) -> Result<Vec<PhantomCase>> {
    spec.validate()?;
    let mut r = rng::seeded(spec.seed);
    let evi = label_vector(spec.n_patients, spec.positives(spec.evi_rate), &mut r);
    let mfi = label_vector(spec.n_patients, spec.positives(spec.mfi_rate), &mut r);
    (0..spec.n_patients)
        .into_par_iter()
        .map(|i| make_case(spec, i, evi[i], mfi[i]))
        .collect()
}

/// Applies the site's fixed frequency perturbation to every z slice.
pub fn simulate_site_shift(vol: &Volume, site: usize, n_sites: usize) -> Result<Volume> {
    if site >= n_sites || n_sites > SITE_TABLE.len() {
        return Err(Error::InvalidArgument(format!("site {site} outside 0..{n_sites}")));
    }
    let (radius, gain) = SITE_TABLE[site];
    if gain == 1.0 {
        return Ok(vol.clone());
    }
    let slices = vol
        .slices_z()
        .iter()
        .map(|s| Ok(ifft2_centered(&perturb(&fft2_centered(s)?, radius, gain)?)))
        .collect::<Result<Vec<_>>>()?;
    vol.from_slices_like(&slices)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Largest-remainder allocation of `total` across strata of sizes `sizes`.
fn allocate(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let quotas: Vec<f64> = sizes.iter().map(|&s| s as f64 * total as f64 / n as f64).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = total - alloc.iter().sum::<usize>();
    for &i in order.iter().cycle().take(4 * sizes.len()) {
        if left == 0 {
            break;
        }
        if alloc[i] < sizes[i] {
            alloc[i] += 1;
            left -= 1;
        }
    }
    alloc
}

fn stratified_take(pool: &[usize], labels: &[(u8, u8)], fraction: f64, r: &mut rng::Rng) -> (Vec<usize>, Vec<usize>) {
    let mut strata: [Vec<usize>; 4] = Default::default();
    for &i in pool {
        let (e, m) = labels[i];
        strata[usize::from(e) * 2 + usize::from(m)].push(i);
    }
    let total = (pool.len() as f64 * fraction).round() as usize;
    let sizes: Vec<usize> = strata.iter().map(Vec::len).collect();
    let alloc = allocate(&sizes, total);
    let (mut taken, mut rest) = (Vec::new(), Vec::new());
    for (s, k) in strata.iter_mut().zip(alloc) {
        s.shuffle(r);
        taken.extend_from_slice(&s[..k]);
        rest.extend_from_slice(&s[k..]);
    }
    taken.sort_unstable();
    rest.sort_unstable();
    (taken, rest)
}

/// Two-stage split stratified on the joint `(evi, mfi)` label: `test_frac`
/// of all cases for test, then `val_frac` of the remainder for validation.
pub fn split_dataset(labels: &[(u8, u8)], test_frac: f64, val_frac: f64, seed: u64) -> Result<Split> {
    if labels.len() < 5 {
        return Err(Error::InvalidArgument("need at least 5 cases to split".into()));
    }
    if !(0.0..1.0).contains(&test_frac) || !(0.0..1.0).contains(&val_frac) {
        return Err(Error::InvalidArgument("split fractions must lie in [0, 1)".into()));
    }
    let mut r = rng::seeded(seed);
    let all: Vec<usize> = (0..labels.len()).collect();
    let (test, train_val) = stratified_take(&all, labels, test_frac, &mut r);
    let (val, train) = stratified_take(&train_val, labels, val_frac, &mut r);
    Ok(Split { train, val, test })
}
