mod common;

use common::{random_slice, random_volume};
use fstg_core::freq::{
    ae_forward, ae_loss, generate_variants, harmonize_volume, train_harmonizer, HarmonizerModel, PerturbationConfig,
    TrainConfig,
};
use fstg_core::phantom::{generate, PhantomSpec};
use fstg_core::preprocess::zscore;
use fstg_core::{rng, Error};

fn reference_slice() -> fstg_core::Slice2d {
    let spec = PhantomSpec {
        n_patients: 4,
        dims: [16, 16, 8],
        apply_site_shift: false,
        seed: 11,
        ..PhantomSpec::default()
    };
    let case = &generate(&spec).unwrap()[0];
    zscore(&case.axial).unwrap().slice_z(4)
}

#[test]
fn single_slice_training_beats_the_perturbed_input() {
    let slice = reference_slice();
    let perturb = PerturbationConfig {
        n_variants: 20,
        rng_seed: 1,
        ..PerturbationConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 120,
        ..TrainConfig::default()
    };
    let (model, report) = train_harmonizer(std::slice::from_ref(&slice), &perturb, &cfg).unwrap();
    assert_eq!(report.pairs, 20);
    assert_eq!(report.epoch_losses.len(), 120);
    assert!(report.epoch_losses.last().unwrap() < &report.epoch_losses[0]);
    let held_out = generate_variants(
        &slice,
        &PerturbationConfig {
            rng_seed: 999,
            ..perturb
        },
    )
    .unwrap();
    let (mut base, mut fixed) = (0.0, 0.0);
    for v in &held_out {
        base += v.mse(&slice);
        fixed += ae_forward(&model, v).unwrap().mse(&slice);
    }
    assert!(fixed < 0.5 * base, "harmonized {fixed} vs perturbed {base}");
}

#[test]
fn training_is_reproducible() {
    let s = random_slice(8, 8, 3);
    let p = PerturbationConfig {
        n_variants: 4,
        ..PerturbationConfig::default()
    };
    let c = TrainConfig {
        epochs: 3,
        batch_size: Some(3),
        ..TrainConfig::default()
    };
    let (a, ra) = train_harmonizer(std::slice::from_ref(&s), &p, &c).unwrap();
    let (b, rb) = train_harmonizer(std::slice::from_ref(&s), &p, &c).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}

#[test]
fn forward_keeps_dims_and_persists() {
    let m = HarmonizerModel::init(&mut rng::seeded(4));
    let v = random_volume([16, 8, 3], 5);
    let out = harmonize_volume(&m, &v).unwrap();
    assert_eq!(out.dims(), v.dims());
    assert_eq!(out.spacing(), v.spacing());
    let bytes = m.encode();
    assert_eq!(&bytes[..4], b"FHAE");
    let back = HarmonizerModel::decode(&bytes).unwrap();
    // the payload is f32, so a second roundtrip is exact
    assert_eq!(HarmonizerModel::decode(&back.encode()).unwrap(), back);
    let a = harmonize_volume(&back, &v).unwrap();
    let drift = a
        .data()
        .iter()
        .zip(out.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-4);
}

#[test]
fn geometry_and_argument_errors() {
    let m = HarmonizerModel::init(&mut rng::seeded(6));
    assert!(matches!(
        ae_forward(&m, &random_slice(12, 8, 1)),
        Err(Error::BadGeometry(_))
    ));
    let a = random_slice(8, 8, 1);
    assert!(matches!(
        ae_loss(&m, &a, &random_slice(8, 16, 1), 0.0),
        Err(Error::ShapeMismatch(_))
    ));
    assert!(ae_loss(&m, &a, &a, -1.0).is_err());
    assert!((ae_loss(&m, &a, &a, 0.0).unwrap()).abs() < 1e-15);
    let p = PerturbationConfig::default();
    assert!(train_harmonizer(&[], &p, &TrainConfig::default()).is_err());
    assert!(train_harmonizer(
        &[a],
        &p,
        &TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        }
    )
    .is_err());
    assert!(HarmonizerModel::decode(b"FHAE").is_err());
}
