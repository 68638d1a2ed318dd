mod common;

use common::random_volume;
use fstg_core::augment::{flip, gamma_adjust, gibbs_ringing, intensity_affine, random_augment, AugmentConfig, Axis};
use fstg_core::rng;
use fstg_core::Volume;
use proptest::prelude::*;

fn energy(v: &Volume) -> f64 {
    v.data().iter().map(|x| x * x).sum()
}

#[test]
fn flip_reverses_one_axis() {
    let v = Volume::from_fn([3, 2, 2], [1.0; 3], fstg_core::Plane::Axial, |x, y, z| {
        (x + 10 * y + 100 * z) as f64
    })
    .unwrap();
    assert_eq!(flip(&v, Axis::X).get(0, 1, 1), v.get(2, 1, 1));
    assert_eq!(flip(&v, Axis::Y).get(2, 0, 1), v.get(2, 1, 1));
    assert_eq!(flip(&v, Axis::Z).get(1, 1, 0), v.get(1, 1, 1));
}

#[test]
fn gamma_one_and_keep_all_are_identities() {
    let v = random_volume([8, 6, 2], 1);
    let g = gamma_adjust(&v, 1.0).unwrap();
    assert!(g.data().iter().zip(v.data()).all(|(a, b)| (a - b).abs() < 1e-12));
    let k = gibbs_ringing(&v, 1.0).unwrap();
    assert!(k.data().iter().zip(v.data()).all(|(a, b)| (a - b).abs() < 1e-9));
}

#[test]
fn gibbs_rings_at_an_edge() {
    let step = Volume::from_fn([32, 32, 1], [1.0; 3], fstg_core::Plane::Axial, |x, _, _| {
        f64::from(u8::from(x >= 16))
    })
    .unwrap();
    let r = gibbs_ringing(&step, 0.3).unwrap();
    let (lo, hi) = r.min_max();
    assert!(lo < -0.02 && hi > 1.02, "no overshoot: {lo} {hi}");
}

#[test]
fn invalid_parameters() {
    let v = random_volume([4, 4, 1], 2);
    assert!(intensity_affine(&v, 0.0, 1.0).is_err());
    assert!(gamma_adjust(&v, -1.0).is_err());
    assert!(gibbs_ringing(&v, 0.0).is_err());
    assert!(gibbs_ringing(&v, 1.5).is_err());
    let bad = AugmentConfig {
        flip_prob: 2.0,
        ..AugmentConfig::default()
    };
    assert!(random_augment(&v, &bad, &mut rng::seeded(0)).is_err());
}

fn any_config() -> impl Strategy<Value = AugmentConfig> {
    (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(a, b, c, d)| AugmentConfig {
        flip_prob: a,
        affine_prob: b,
        gamma_prob: c,
        gibbs_prob: d,
        ..AugmentConfig::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn augmentation_keeps_geometry(
        dims in (1usize..10, 1usize..10, 1usize..4),
        cfg in any_config(),
        seed in any::<u64>(),
    ) {
        let v = random_volume([dims.0, dims.1, dims.2], seed);
        let out = random_augment(&v, &cfg, &mut rng::seeded(seed)).unwrap();
        prop_assert_eq!(out.dims(), v.dims());
        prop_assert_eq!(out.spacing(), v.spacing());
        prop_assert_eq!(out.plane(), v.plane());
    }

    #[test]
    fn seeded_augmentation_repeats(cfg in any_config(), seed in any::<u64>()) {
        let v = random_volume([6, 5, 2], 3);
        let a = random_augment(&v, &cfg, &mut rng::seeded(seed)).unwrap();
        prop_assert_eq!(a, random_augment(&v, &cfg, &mut rng::seeded(seed)).unwrap());
    }

    #[test]
    fn gibbs_never_adds_energy(dims in (2usize..16, 2usize..16, 1usize..3), k in 0.05f64..=1.0, seed in any::<u64>()) {
        let v = random_volume([dims.0, dims.1, dims.2], seed);
        let g = gibbs_ringing(&v, k).unwrap();
        prop_assert!(energy(&g) <= energy(&v) * (1.0 + 1e-12));
    }

    #[test]
    fn flips_are_involutions(seed in any::<u64>()) {
        let v = random_volume([5, 4, 3], seed);
        for a in [Axis::X, Axis::Y, Axis::Z] {
            prop_assert_eq!(flip(&flip(&v, a), a), v.clone());
        }
    }
}
