use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::Matrix;

/// Principal axes of a centered sample, sorted by explained variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `d`.
    pub components: Vec<Vec<f64>>,
    /// Sample variance (divisor `n - 1`) along each component.
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn explained_ratio(&self) -> f64 {
        self.explained_variance.iter().sum::<f64>() / self.total_variance
    }
}

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Components {
    /// Smallest count whose cumulative explained ratio reaches the target.
    Variance(f64),
    Fixed(usize),
}

/// Fits PCA by thin SVD of the centered data. `k` is capped at
/// `min(n - 1, d)`.
pub fn pca_fit(x: &Matrix, variance_target: f64) -> Result<PcaModel> {
    pca_fit_with(x, Components::Variance(variance_target))
}

pub fn pca_fit_with(x: &Matrix, select: Components) -> Result<PcaModel> {
    let (n, d) = (x.rows, x.cols);
    if n < 2 || d == 0 {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least 2 samples and 1 feature, got {n}x{d}"
        )));
    }
    match select {
        Components::Variance(t) if !(t > 0.0 && t <= 1.0) => {
            return Err(Error::InvalidArgument(format!("variance target {t} outside (0, 1]")))
        }
        Components::Fixed(0) => return Err(Error::InvalidArgument("need at least one component".into())),
        _ => {}
    }
    let mut mean = vec![0.0; d];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, d, |i, j| x.data[i * d + j] - mean[j]);
    let total_variance = centered.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
    if !(total_variance > 0.0) || !total_variance.is_finite() {
        return Err(Error::DegenerateData);
    }
    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Divergence("SVD did not produce right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let variances: Vec<f64> = order
        .iter()
        .map(|&i| svd.singular_values[i].powi(2) / (n - 1) as f64)
        .collect();
    let cap = (n - 1).min(d).min(order.len());
    let k = match select {
        Components::Fixed(k) => k.min(cap),
        Components::Variance(target) => {
            let mut acc = 0.0;
            let mut k = cap;
            for (i, v) in variances.iter().enumerate().take(cap) {
                acc += v;
                if acc / total_variance >= target - 1e-12 {
                    k = i + 1;
                    break;
                }
            }
            k
        }
    };
    let components = order[..k]
        .iter()
        .map(|&i| {
            let mut row: Vec<f64> = v_t.row(i).iter().copied().collect();
            // sign: largest-magnitude entry positive
            let pivot = row
                .iter()
                .copied()
                .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
            if pivot < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
            }
            row
        })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variance: variances[..k].to_vec(),
        total_variance,
    })
}

/// Scores `(x - mean) * components^T`.
pub fn pca_transform(model: &PcaModel, x: &Matrix) -> Result<Matrix> {
    if x.cols != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.cols,
        });
    }
    let mut out = Vec::with_capacity(x.rows * model.k());
    for row in x.rows() {
        for comp in &model.components {
            out.push(
                row.iter()
                    .zip(&model.mean)
                    .zip(comp)
                    .map(|((v, m), c)| (v - m) * c)
                    .sum(),
            );
        }
    }
    Matrix::new(x.rows, model.k(), out)
}
