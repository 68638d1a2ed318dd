#![allow(dead_code)]

use fstg_core::nn::{Params, Tensor4};
use fstg_core::{rng, Plane, Slice2d, Volume};
use rand::seq::index::sample;
use rand::Rng;

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-3;

pub fn random_tensor(channels: usize, dims: [usize; 3], seed: u64) -> Tensor4 {
    let mut r = rng::seeded(seed);
    let n = channels * dims.iter().product::<usize>();
    Tensor4::new(channels, dims, (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_slice(w: usize, h: usize, seed: u64) -> Slice2d {
    let mut r = rng::seeded(seed);
    Slice2d::new(w, h, (0..w * h).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_volume(dims: [usize; 3], seed: u64) -> Volume {
    let mut r = rng::seeded(seed);
    let n = dims.iter().product();
    Volume::new(
        dims,
        [1.0, 1.0, 3.0],
        Plane::Axial,
        (0..n).map(|_| r.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

pub fn dot(a: &Tensor4, b: &Tensor4) -> f64 {
    a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum()
}

/// Central differences on up to `max_checks` randomly chosen parameters of
/// `model`; returns the worst relative error against `grads`.
pub fn check_params<P: Params>(model: &P, grads: &P, loss: impl Fn(&P) -> f64, max_checks: usize, seed: u64) -> f64 {
    let flat = model.flat();
    let g = grads.flat();
    assert_eq!(flat.len(), g.len());
    let mut r = rng::seeded(seed);
    let picks: Vec<usize> = if flat.len() <= max_checks {
        (0..flat.len()).collect()
    } else {
        sample(&mut r, flat.len(), max_checks).into_vec()
    };
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for i in picks {
        let mut p = flat.clone();
        p[i] = flat[i] + H;
        probe.set_flat(&p);
        let up = loss(&probe);
        p[i] = flat[i] - H;
        probe.set_flat(&p);
        let down = loss(&probe);
        let numeric = (up - down) / (2.0 * H);
        worst = worst.max(rel_err(g[i], numeric));
    }
    worst
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Central differences with respect to a tensor input.
pub fn check_input(x: &Tensor4, dx: &Tensor4, loss: impl Fn(&Tensor4) -> f64) -> f64 {
    let mut worst = 0.0f64;
    let mut p = x.clone();
    for i in 0..x.data.len() {
        p.data[i] = x.data[i] + H;
        let up = loss(&p);
        p.data[i] = x.data[i] - H;
        let down = loss(&p);
        p.data[i] = x.data[i];
        worst = worst.max(rel_err(dx.data[i], (up - down) / (2.0 * H)));
    }
    worst
}

/// Adds small noise to every parameter so no activation sits exactly on a
/// LeakyReLU kink (zero biases and zero norm shifts do at init).
pub fn jitter<P: Params>(model: &mut P, seed: u64) {
    let mut r = rng::seeded(seed);
    let flat: Vec<f64> = model
        .flat()
        .into_iter()
        .map(|v| v + r.random_range(-0.2..0.2))
        .collect();
    model.set_flat(&flat);
}
