use fstg_core::learn::{
    focal_loss, focal_loss_logit, logistic_loss, logreg_fit, logreg_predict, pca_fit, pca_fit_with, pca_transform,
    weighted_bce, weighted_bce_logit, Components, Matrix, PcaModel,
};
use fstg_core::{rng, Error};
use fstg_oracles::{covariance, jacobi_eigen, max_principal_angle, max_relative_error, numeric_gradient};
use proptest::prelude::*;
use rand::Rng;

fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::seeded(seed);
    // unequal column scales keep the spectrum well separated
    (0..n)
        .map(|_| (0..d).map(|j| r.random_range(-1.0..1.0) * (1.0 + j as f64)).collect())
        .collect()
}

fn gram_error(m: &PcaModel) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in m.components.iter().enumerate() {
        for (j, b) in m.components.iter().enumerate() {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            worst = worst.max((dot - f64::from(u8::from(i == j))).abs());
        }
    }
    worst
}

#[test]
fn pca_agrees_with_jacobi_on_20x6() {
    for seed in 0..5 {
        let rows = random_rows(20, 6, seed);
        let x = Matrix::from_rows(&rows).unwrap();
        let (values, vectors) = jacobi_eigen(&covariance(&rows), 6);
        for k in 1..=6 {
            let m = pca_fit_with(&x, Components::Fixed(k)).unwrap();
            assert!(gram_error(&m) < 1e-8);
            let angle = max_principal_angle(&m.components, &vectors[..k]);
            assert!(angle < 1e-6, "seed {seed} k {k}: {angle}");
            for (a, b) in m.explained_variance.iter().zip(&values) {
                assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
            }
        }
        let trace: f64 = values.iter().sum();
        let full = pca_fit_with(&x, Components::Fixed(6)).unwrap();
        assert!((full.explained_variance.iter().sum::<f64>() - trace).abs() < 1e-6);
        assert!((full.total_variance - trace).abs() < 1e-9);
        // full-rank reconstruction
        let scores = pca_transform(&full, &x).unwrap();
        let mut worst = 0.0f64;
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let rec = full.mean[j] + (0..6).map(|c| scores.row(i)[c] * full.components[c][j]).sum::<f64>();
                worst = worst.max((rec - v).abs());
            }
        }
        assert!(worst < 1e-6);
    }
}

#[test]
fn variance_target_picks_smallest_k() {
    let rows = random_rows(30, 5, 9);
    let x = Matrix::from_rows(&rows).unwrap();
    let (values, _) = jacobi_eigen(&covariance(&rows), 5);
    let total: f64 = values.iter().sum();
    let m = pca_fit(&x, 0.9).unwrap();
    let kept: f64 = values[..m.k()].iter().sum();
    let fewer: f64 = values[..m.k() - 1].iter().sum();
    assert!(kept / total >= 0.9 - 1e-12);
    assert!(fewer / total < 0.9);
}

#[test]
fn pca_errors() {
    let one = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
    assert!(pca_fit(&one, 0.95).is_err());
    let flat = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
    assert!(matches!(pca_fit(&flat, 0.95), Err(Error::DegenerateData)));
    let ok = Matrix::from_rows(&random_rows(5, 3, 1)).unwrap();
    assert!(pca_fit(&ok, 0.0).is_err());
    let m = pca_fit(&ok, 0.95).unwrap();
    let wrong = Matrix::from_rows(&[vec![0.0; 4]]).unwrap();
    assert!(matches!(
        pca_transform(&m, &wrong),
        Err(Error::DimensionMismatch { .. })
    ));
}

fn separable(seed: u64) -> (Matrix, Vec<u8>) {
    let rows = random_rows(40, 3, seed);
    let y = rows.iter().map(|r| u8::from(r[0] + 0.3 * r[1] + 0.2 > 0.0)).collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn logistic_optimum_is_stationary() {
    let (x, y) = separable(2);
    let m = logreg_fit(&x, &y, 0.1).unwrap();
    assert!(m.grad_inf_norm < 1e-6);
    let mut p = m.weights.clone();
    p.push(m.intercept);
    let g = numeric_gradient(&mut |q| logistic_loss(&x, &y, 0.1, q), &p, 1e-5);
    assert!(g.iter().all(|v| v.abs() < 1e-5));
    let prob = logreg_predict(&m, x.row(0)).unwrap();
    assert!(prob > 0.0 && prob < 1.0);
    assert!(logreg_predict(&m, &[1.0]).is_err());
    assert!(matches!(logreg_fit(&x, &[1; 40], 0.1), Err(Error::SingleClass)));
}

#[test]
fn stronger_penalty_never_grows_weights() {
    let (x, y) = separable(3);
    let mut last = f64::INFINITY;
    for lambda in [1e-3, 1e-2, 0.1, 0.3, 1.0, 3.0, 10.0] {
        let m = logreg_fit(&x, &y, lambda).unwrap();
        let norm = m.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!(norm <= last + 1e-9, "lambda {lambda}: {norm} > {last}");
        last = norm;
    }
}

#[test]
fn loss_derivatives_match_finite_differences() {
    for &(y, alpha, gamma) in &[(1u8, 0.3, 2.0), (0, 0.3, 2.0), (1, 0.7, 0.0), (0, 0.5, 1.5)] {
        for z in [-3.0, -0.4, 0.0, 0.9, 4.0] {
            let (_, g) = focal_loss_logit(z, y, alpha, gamma);
            let n = numeric_gradient(&mut |q| focal_loss_logit(q[0], y, alpha, gamma).0, &[z], 1e-6);
            assert!(max_relative_error(&[g], &n, 1e-8) < 1e-6);
            let (_, g) = weighted_bce_logit(z, y, 2.5);
            let n = numeric_gradient(&mut |q| weighted_bce_logit(q[0], y, 2.5).0, &[z], 1e-6);
            assert!(max_relative_error(&[g], &n, 1e-8) < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn logistic_loss_is_minimal_at_the_fit(seed in any::<u64>(), lambda in 0.01f64..2.0) {
        let (x, y) = separable(seed);
        prop_assume!(y.contains(&1) && y.contains(&0));
        let m = logreg_fit(&x, &y, lambda).unwrap();
        let mut opt = m.weights.clone();
        opt.push(m.intercept);
        let best = logistic_loss(&x, &y, lambda, &opt);
        let mut r = rng::seeded(seed ^ 0xABCD);
        for _ in 0..100 {
            let dir: Vec<f64> = (0..opt.len()).map(|_| r.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let p: Vec<f64> = opt.iter().zip(&dir).map(|(o, d)| o + 0.1 * d / norm).collect();
            prop_assert!(best <= logistic_loss(&x, &y, lambda, &p) + 1e-12);
        }
    }

    #[test]
    fn losses_are_non_negative(p in 1e-9f64..(1.0 - 1e-9), z in -30.0f64..30.0, a in 0.0f64..=1.0, g in 0.0f64..4.0, y in 0u8..2) {
        prop_assert!(focal_loss(p, y, a, g) >= 0.0);
        prop_assert!(focal_loss_logit(z, y, a, g).0 >= 0.0);
        prop_assert!(weighted_bce(&[p], &[y], 2.0) >= 0.0);
        prop_assert!(weighted_bce_logit(z, y, 2.0).0 >= 0.0);
    }

    #[test]
    fn losses_vanish_only_at_confident_truth(y in 0u8..2) {
        let target = f64::from(y);
        prop_assert_eq!(weighted_bce(&[target], &[y], 3.0), 0.0);
        prop_assert_eq!(focal_loss(target, y, 0.4, 2.0), 0.0);
        let wrong = 1.0 - 0.7 * target - 0.15;
        prop_assert!(weighted_bce(&[wrong], &[y], 3.0) > 0.0);
        prop_assert!(focal_loss(wrong, y, 0.4, 2.0) > 0.0);
    }

    #[test]
    fn pca_components_are_orthonormal(n in 3usize..25, d in 1usize..8, seed in any::<u64>()) {
        let x = Matrix::from_rows(&random_rows(n, d, seed)).unwrap();
        let m = pca_fit(&x, 1.0).unwrap();
        prop_assert!(gram_error(&m) < 1e-8);
        prop_assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        if m.k() == d.min(n - 1) {
            prop_assert!((m.explained_variance.iter().sum::<f64>() - m.total_variance).abs() < 1e-6);
        }
    }
}
