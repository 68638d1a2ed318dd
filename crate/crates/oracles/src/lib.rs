//! Reference implementations written for clarity rather than speed. None of
//! them share code with `fstg-core`; tests compare the two.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

/// Direct 2-D DFT, `O((W*H)^2)`, with the zero frequency moved to
/// `(W/2, H/2)`. Input and output are row-major with `width` columns.
pub fn dft2_centered(data: &[f64], width: usize, height: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); width * height];
    for v in 0..height {
        for u in 0..width {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..height {
                for x in 0..width {
                    let phase =
                        -2.0 * std::f64::consts::PI * ((u * x) as f64 / width as f64 + (v * y) as f64 / height as f64);
                    acc += data[y * width + x] * Complex64::from_polar(1.0, phase);
                }
            }
            let cu = (u + width / 2) % width;
            let cv = (v + height / 2) % height;
            out[cv * width + cu] = acc;
        }
    }
    out
}

/// AUC by comparing every positive with every negative. Returns
/// `(2 * U, n_pos * n_neg)` so callers can compare exactly.
pub fn auc_pairwise(labels: &[u8], scores: &[f64]) -> Option<(u64, u64)> {
    let mut twice_u = 0u64;
    let (mut pos, mut neg) = (0u64, 0u64);
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            neg += 1;
            continue;
        }
        pos += 1;
        for (j, &yj) in labels.iter().enumerate() {
            if yj == 1 {
                continue;
            }
            if scores[i] > scores[j] {
                twice_u += 2;
            } else if scores[i] == scores[j] {
                twice_u += 1;
            }
        }
    }
    (pos > 0 && neg > 0).then_some((twice_u, pos * neg))
}

pub fn auc_pairwise_f64(labels: &[u8], scores: &[f64]) -> Option<f64> {
    auc_pairwise(labels, scores).map(|(t, pq)| (t as f64 / 2.0) / pq as f64)
}

/// Separation of two unit-variance normals whose AUC is `auc`.
pub fn binormal_separation(auc: f64) -> f64 {
    let std = StatNormal::new(0.0, 1.0).expect("standard normal");
    std::f64::consts::SQRT_2 * std.inverse_cdf(auc)
}

/// Scores with a known population AUC: negatives from N(0,1), positives
/// from N(d,1). Labels are ordered positives first.
pub fn binormal_sample<R: Rng>(n_pos: usize, n_neg: usize, auc: f64, rng: &mut R) -> (Vec<u8>, Vec<f64>) {
    let d = binormal_separation(auc);
    let pos = Normal::new(d, 1.0).expect("finite mean");
    let neg = Normal::new(0.0, 1.0).expect("finite mean");
    let mut labels = vec![1u8; n_pos];
    labels.extend(std::iter::repeat_n(0u8, n_neg));
    let mut scores: Vec<f64> = (0..n_pos).map(|_| pos.sample(rng)).collect();
    scores.extend((0..n_neg).map(|_| neg.sample(rng)));
    (labels, scores)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major,
/// `n x n`). Returns eigenvalues in descending order with unit eigenvectors
/// as rows.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k * n + i]).collect()).collect();
    (values, vectors)
}

/// Sample covariance (divisor `n - 1`) of row-major data.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut c = vec![0.0; d * d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                c[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    c.iter_mut().for_each(|x| *x /= (n - 1) as f64);
    c
}

/// Largest principal angle (radians) between the row spaces of two
/// orthonormal bases, via the spectral norm of the projector difference.
pub fn max_principal_angle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let d = a[0].len();
    let proj = |basis: &[Vec<f64>]| {
        let mut p = vec![0.0; d * d];
        for v in basis {
            for i in 0..d {
                for j in 0..d {
                    p[i * d + j] += v[i] * v[j];
                }
            }
        }
        p
    };
    let (pa, pb) = (proj(a), proj(b));
    let diff: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x - y).collect();
    let (values, _) = jacobi_eigen(&diff, d);
    let norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    norm.min(1.0).asin()
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max |a - n| / max(|a|, |n|, floor)` over all components.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Reported operating points: (sensitivity, specificity, F1, balanced accuracy),
/// rounded to two decimals.
pub const REPORTED_OPERATING_POINTS: [(f64, f64, f64, f64); 32] = [
    (0.0, 0.98, 0.0, 0.49),
    (0.70, 0.44, 0.48, 0.57),
    (0.65, 0.67, 0.54, 0.66),
    (0.60, 0.80, 0.59, 0.70),
    (0.0, 1.0, 0.0, 0.50),
    (0.85, 0.36, 0.52, 0.60),
    (0.60, 0.64, 0.50, 0.62),
    (0.45, 0.71, 0.43, 0.58),
    (1.0, 0.0, 0.38, 0.50),
    (0.73, 0.64, 0.50, 0.69),
    (0.60, 0.66, 0.44, 0.63),
    (0.60, 0.82, 0.55, 0.71),
    (0.0, 1.0, 0.0, 0.50),
    (0.60, 0.70, 0.46, 0.65),
    (0.73, 0.70, 0.54, 0.72),
    (0.40, 0.90, 0.46, 0.65),
    (0.05, 1.0, 0.10, 0.53),
    (0.55, 0.58, 0.44, 0.56),
    (0.50, 0.71, 0.47, 0.61),
    (0.60, 0.76, 0.56, 0.68),
    (0.80, 0.60, 0.59, 0.70),
    (0.70, 0.53, 0.51, 0.62),
    (0.0, 1.0, 0.0, 0.50),
    (0.35, 0.80, 0.39, 0.58),
    (1.0, 0.0, 0.38, 0.50),
    (0.87, 0.14, 0.37, 0.50),
    (0.53, 0.66, 0.40, 0.60),
    (0.40, 0.80, 0.39, 0.60),
    (1.0, 0.0, 0.38, 0.50),
    (0.73, 0.70, 0.54, 0.72),
    (0.53, 0.62, 0.38, 0.58),
    (0.27, 0.76, 0.26, 0.51),
];

/// MFI-positive fraction of the reported cohort.
pub const MFI_PREVALENCE: f64 = 0.236;
