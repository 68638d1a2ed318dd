use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::loss::{sigmoid, softplus};
use crate::learn::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub grad_inf_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRegOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogRegOptions {
    fn default() -> Self {
        LogRegOptions {
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

/// Objective `mean(softplus(z) - y z) + lambda/2 |w|^2` with
/// `z = w.x + b`. `params` is `[w..., b]`.
pub fn logistic_loss(x: &Matrix, y: &[u8], lambda: f64, params: &[f64]) -> f64 {
    let (w, b) = params.split_at(x.cols);
    let data: f64 = x
        .rows()
        .zip(y)
        .map(|(row, &yi)| {
            let z = b[0] + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            softplus(z) - f64::from(yi) * z
        })
        .sum();
    data / x.rows as f64 + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

pub fn logistic_loss_grad(x: &Matrix, y: &[u8], lambda: f64, params: &[f64]) -> Vec<f64> {
    let (w, b) = params.split_at(x.cols);
    let mut g = vec![0.0; params.len()];
    for (row, &yi) in x.rows().zip(y) {
        let z = b[0] + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        let r = sigmoid(z) - f64::from(yi);
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += r * xj;
        }
        g[x.cols] += r;
    }
    let n = x.rows as f64;
    for (j, gj) in g.iter_mut().enumerate() {
        *gj /= n;
        if j < x.cols {
            *gj += lambda * w[j];
        }
    }
    g
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// L2-regularized logistic regression by gradient descent with a
/// Barzilai-Borwein trial step and Armijo backtracking.
pub fn logreg_fit(x: &Matrix, y: &[u8], lambda: f64) -> Result<LrModel> {
    logreg_fit_with(x, y, lambda, LogRegOptions::default())
}

pub fn logreg_fit_with(x: &Matrix, y: &[u8], lambda: f64, opts: LogRegOptions) -> Result<LrModel> {
    if y.len() != x.rows {
        return Err(Error::DimensionMismatch {
            expected: x.rows,
            got: y.len(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} must be >= 0")));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass);
    }
    let mut theta = vec![0.0; x.cols + 1];
    let mut f = logistic_loss(x, y, lambda, &theta);
    let mut g = logistic_loss_grad(x, y, lambda, &theta);
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    while inf_norm(&g) >= opts.tol && iterations < opts.max_iter {
        if let Some((pt, pg)) = &prev {
            let s: Vec<f64> = theta.iter().zip(pt).map(|(a, b)| a - b).collect();
            let yv: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
            let ss: f64 = s.iter().map(|a| a * a).sum();
            if sy > 0.0 {
                step = (ss / sy).clamp(1e-10, 1e10);
            }
        }
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let mut t = step;
        let (next, f_next) = loop {
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(p, gi)| p - t * gi).collect();
            let fc = logistic_loss(x, y, lambda, &cand);
            if fc <= f - 1e-4 * t * gg {
                break (cand, fc);
            }
            t *= 0.5;
            if t < 1e-20 {
                // no representable decrease left
                break (theta.clone(), f);
            }
        };
        if !f_next.is_finite() || next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("logistic regression objective".into()));
        }
        iterations += 1;
        if next == theta {
            break;
        }
        let g_next = logistic_loss_grad(x, y, lambda, &next);
        prev = Some((std::mem::replace(&mut theta, next), std::mem::replace(&mut g, g_next)));
        f = f_next;
        step = t;
    }
    let intercept = theta.pop().unwrap();
    Ok(LrModel {
        weights: theta,
        intercept,
        lambda,
        iterations,
        grad_inf_norm: inf_norm(&g),
    })
}

/// `sigmoid(w.x + b)`.
pub fn logreg_predict(model: &LrModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: model.weights.len(),
            got: x.len(),
        });
    }
    let z = model.intercept + x.iter().zip(&model.weights).map(|(a, b)| a * b).sum::<f64>();
    Ok(sigmoid(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_1d() {
        let x = Matrix::new(8, 1, vec![-4.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = [0, 0, 0, 0, 1, 1, 1, 1];
        let m = logreg_fit(&x, &y, 0.1).unwrap();
        assert!(m.grad_inf_norm < 1e-8);
        for (row, &yi) in x.rows().zip(&y) {
            let p = logreg_predict(&m, row).unwrap();
            assert_eq!(u8::from(p >= 0.5), yi);
        }
    }

    #[test]
    fn heavy_regularization_predicts_prior() {
        let x = Matrix::new(5, 2, vec![1.0, 0.0, 0.0, 2.0, -1.0, 1.0, 3.0, -2.0, 0.5, 0.5]).unwrap();
        let y = [1, 0, 0, 1, 0];
        let m = logreg_fit(&x, &y, 1e6).unwrap();
        let norm = m.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!(norm < 1e-3);
        let prior = 0.4f64;
        assert!((m.intercept - (prior / (1.0 - prior)).ln()).abs() < 1e-4);
        for row in x.rows() {
            assert!((logreg_predict(&m, row).unwrap() - prior).abs() < 0.01);
        }
    }

    #[test]
    fn predict_contract() {
        let m = LrModel {
            weights: vec![0.0, 0.0],
            intercept: 0.0,
            lambda: 0.0,
            iterations: 0,
            grad_inf_norm: 0.0,
        };
        assert_eq!(logreg_predict(&m, &[3.0, -1.0]).unwrap(), 0.5);
        assert!(logreg_predict(&m, &[1.0]).is_err());
        let m = LrModel {
            weights: vec![0.7, -1.3],
            ..m
        };
        let p = logreg_predict(&m, &[0.4, 0.9]).unwrap();
        let q = logreg_predict(&m, &[-0.4, -0.9]).unwrap();
        assert!((p + q - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_class() {
        let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(matches!(logreg_fit(&x, &[1, 1], 0.1), Err(Error::SingleClass)));
    }
}
