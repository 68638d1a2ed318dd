//! PCA, logistic regression, the MLP head and classification losses.

mod logreg;
mod loss;
mod mlp;
mod pca;

pub use logreg::{
    logistic_loss, logistic_loss_grad, logreg_fit, logreg_fit_with, logreg_predict, LogRegOptions, LrModel,
};
pub use loss::{focal_loss, focal_loss_logit, sigmoid, softplus, weighted_bce, weighted_bce_logit};
pub use mlp::{MlpCache, MlpHead};
pub use pca::{pca_fit, pca_fit_with, pca_transform, Components, PcaModel};

use crate::error::{Error, Result};

/// Dense row-major sample matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: bad.len(),
            });
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }
}
