use crate::error::{Error, Result};
use crate::volume::Volume;

/// Resamples to `target` spacing (mm) by trilinear interpolation.
///
/// Output voxel `i` samples the input at continuous index
/// `(i + 0.5) * target / spacing - 0.5`, clamped to the grid.
pub fn resample_trilinear(vol: &Volume, target: [f64; 3]) -> Result<Volume> {
    if target.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
        return Err(Error::DegenerateTarget(target));
    }
    let dims = vol.dims();
    let spacing = vol.spacing();
    let mut out_dims = [0usize; 3];
    let mut ratio = [0.0; 3];
    for a in 0..3 {
        out_dims[a] = ((dims[a] as f64 * spacing[a] / target[a]).round() as usize).max(1);
        ratio[a] = target[a] / spacing[a];
    }
    // Per-axis (lower index, upper index, weight of upper) tables.
    let axis = |a: usize| -> Vec<(usize, usize, f64)> {
        (0..out_dims[a])
            .map(|i| {
                let c = ((i as f64 + 0.5) * ratio[a] - 0.5).clamp(0.0, (dims[a] - 1) as f64);
                let lo = c.floor() as usize;
                let hi = (lo + 1).min(dims[a] - 1);
                (lo, hi, c - lo as f64)
            })
            .collect()
    };
    let (tx, ty, tz) = (axis(0), axis(1), axis(2));
    let mut data = Vec::with_capacity(out_dims.iter().product());
    for &(z0, z1, wz) in &tz {
        for &(y0, y1, wy) in &ty {
            for &(x0, x1, wx) in &tx {
                let c = |x, y, z| vol.get(x, y, z);
                let c00 = c(x0, y0, z0) * (1.0 - wx) + c(x1, y0, z0) * wx;
                let c10 = c(x0, y1, z0) * (1.0 - wx) + c(x1, y1, z0) * wx;
                let c01 = c(x0, y0, z1) * (1.0 - wx) + c(x1, y0, z1) * wx;
                let c11 = c(x0, y1, z1) * (1.0 - wx) + c(x1, y1, z1) * wx;
                let c0 = c00 * (1.0 - wy) + c10 * wy;
                let c1 = c01 * (1.0 - wy) + c11 * wy;
                data.push(c0 * (1.0 - wz) + c1 * wz);
            }
        }
    }
    Volume::new(out_dims, target, vol.plane(), data)
}
