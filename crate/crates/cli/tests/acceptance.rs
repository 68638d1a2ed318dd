//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use fstg_cli::commands::TableRow;
use fstg_cli::config::ExperimentConfig;
use fstg_cli::run::{design_defaults, RunManifest};
use fstg_core::freq::{
    ae_forward, fft2_centered, generate_variants, ifft2_centered, train_harmonizer, HarmonizerModel,
    PerturbationConfig, TrainConfig,
};
use fstg_core::learn::{logistic_loss, logistic_loss_grad, pca_fit_with, pca_transform, Components, Matrix, MlpHead};
use fstg_core::metrics::{
    balanced_accuracy, bootstrap_ci, bootstrap_samples, f1, roc_auc, BootstrapConfig, Metric, PredictionSet, Task,
};
use fstg_core::nn::{
    closed_form_trace, BlockSpec, Conv3d, NormKind, Params, ResidualBlock, SeModule, SeResNet, SeResNetConfig,
    StridePlan, Tensor4,
};
use fstg_core::phantom::{generate, PhantomSpec};
use fstg_core::preprocess::zscore;
use fstg_core::{rng, Slice2d};
use fstg_oracles::{
    auc_pairwise, binormal_sample, covariance, dft2_centered, jacobi_eigen, max_principal_angle, max_relative_error,
    numeric_gradient, MFI_PREVALENCE, REPORTED_OPERATING_POINTS,
};
use rand::Rng;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    let e = t.elapsed();
    ensure(e <= limit, || format!("took {e:.1?}, limit {limit:?}"))
}

fn fft_oracle() -> Result<String, String> {
    let t = Instant::now();
    let mut worst_dft = 0.0f64;
    for seed in 0..20 {
        let s = random_slice(8, 8, seed);
        let fast = fft2_centered(&s).map_err(|e| e.to_string())?;
        let slow = dft2_centered(&s.data, 8, 8);
        for (a, b) in fast.coeffs.iter().zip(&slow) {
            worst_dft = worst_dft.max((a - b).norm());
        }
    }
    let s = random_slice(192, 192, 99);
    let f = fft2_centered(&s).map_err(|e| e.to_string())?;
    let back = ifft2_centered(&f);
    let num: f64 = back.data.iter().zip(&s.data).map(|(a, b)| (a - b) * (a - b)).sum();
    let energy: f64 = s.data.iter().map(|v| v * v).sum();
    let roundtrip = (num / energy).sqrt();
    let parseval = (f.energy() / (192.0 * 192.0) - energy).abs() / energy;
    ensure(worst_dft < 1e-6, || format!("dft error {worst_dft:e}"))?;
    ensure(roundtrip < 1e-5, || format!("roundtrip {roundtrip:e}"))?;
    ensure(parseval < 1e-4, || format!("parseval {parseval:e}"))?;
    within(t, Duration::from_secs(10))?;
    Ok(format!(
        "dft {worst_dft:.1e}, roundtrip {roundtrip:.1e}, parseval {parseval:.1e}"
    ))
}

fn metric_formulas() -> Result<String, String> {
    let t = Instant::now();
    ensure(balanced_accuracy(0.0, 0.98) == 0.49, || {
        "0/0.98 does not give 0.49".into()
    })?;
    let b = balanced_accuracy(0.70, 0.44);
    ensure((b * 100.0).round() / 100.0 == 0.57 && (b - 0.57).abs() < 1e-12, || {
        format!("0.70/0.44 gives {b}")
    })?;
    for (i, &(sens, spec, f, bal)) in REPORTED_OPERATING_POINTS.iter().enumerate() {
        let got = balanced_accuracy(sens, spec);
        ensure((got - bal).abs() <= 0.005 + 1e-12, || {
            format!("row {i}: {got} vs {bal}")
        })?;
        if sens == 0.0 {
            ensure(f == 0.0 && f1(0, 1, 1).map_err(|e| e.to_string())? == 0.0, || {
                format!("row {i} F1")
            })?;
        }
        if sens == 1.0 && spec == 0.0 {
            let all_positive = 2.0 * MFI_PREVALENCE / (1.0 + MFI_PREVALENCE);
            ensure((all_positive * 100.0).round() / 100.0 == f, || {
                format!("row {i}: F1 {all_positive}")
            })?;
        }
    }
    let mut tables = 0usize;
    for tp in 0..=20usize {
        for fp in 0..=20usize {
            for fn_ in 0..=20usize {
                for _tn in 0..=20usize {
                    if tp + fp + fn_ == 0 {
                        continue;
                    }
                    let got = f1(tp, fp, fn_).map_err(|e| e.to_string())?;
                    let expect = if tp == 0 {
                        0.0
                    } else {
                        let p = tp as f64 / (tp + fp) as f64;
                        let r = tp as f64 / (tp + fn_) as f64;
                        2.0 * p * r / (p + r)
                    };
                    ensure((got - expect).abs() <= 1e-14, || {
                        format!("F1 {tp}/{fp}/{fn_}: {got} vs {expect}")
                    })?;
                    tables += 1;
                }
            }
        }
    }
    within(t, Duration::from_secs(30))?;
    Ok(format!(
        "{} reported rows, {tables} confusion tables",
        REPORTED_OPERATING_POINTS.len()
    ))
}

fn auc_oracle() -> Result<String, String> {
    let t = Instant::now();
    let mut r = rng::seeded(3);
    let mut tied = 0;
    for trial in 0..500 {
        let levels = r.random_range(2..60u32);
        let mut labels: Vec<u8> = (0..200).map(|_| r.random_range(0..2u8)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..200)
            .map(|_| f64::from(r.random_range(0..levels)) / f64::from(levels))
            .collect();
        let (twice_u, pq) = auc_pairwise(&labels, &scores).ok_or("single class")?;
        if twice_u % 2 == 1 {
            tied += 1;
        }
        let p = PredictionSet::new(Task::Evi, labels, scores).map_err(|e| e.to_string())?;
        let got = roc_auc(&p).map_err(|e| e.to_string())?;
        let expect = (twice_u as f64 / 2.0) / pq as f64;
        ensure(got == expect, || format!("trial {trial}: {got} vs {expect}"))?;
    }
    within(t, Duration::from_secs(60))?;
    Ok(format!("500 sets equal, {tied} with an odd tie count"))
}

fn bootstrap() -> Result<String, String> {
    let mut r = rng::seeded(4);
    let (labels, scores) = binormal_sample(20, 46, 0.8, &mut r);
    let p = PredictionSet::new(Task::Evi, labels, scores).map_err(|e| e.to_string())?;
    let cfg = BootstrapConfig {
        seed: 17,
        ..BootstrapConfig::default()
    };
    let mut slowest = Duration::ZERO;
    for m in Metric::ALL {
        let t = Instant::now();
        let a = bootstrap_samples(&p, m, &cfg).map_err(|e| e.to_string())?;
        slowest = slowest.max(t.elapsed());
        within(t, Duration::from_secs(5))?;
        let b = bootstrap_samples(&p, m, &cfg).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{m:?} differs between identical runs"))?;
    }
    let mut hits = 0;
    for trial in 0..100u64 {
        let (labels, scores) = binormal_sample(20, 46, 0.8, &mut r);
        let p = PredictionSet::new(Task::Evi, labels, scores).map_err(|e| e.to_string())?;
        let cfg = BootstrapConfig {
            seed: trial,
            ..BootstrapConfig::default()
        };
        let (lo, hi) = bootstrap_ci(&p, Metric::Auc, &cfg).map_err(|e| e.to_string())?;
        if lo <= 0.8 && 0.8 <= hi {
            hits += 1;
        }
    }
    ensure(hits >= 88, || format!("coverage {hits}/100"))?;
    Ok(format!(
        "deterministic, slowest metric {slowest:.2?}, coverage {hits}/100"
    ))
}

fn gradient_checks() -> Result<String, String> {
    let t = Instant::now();
    let mut worst = BTreeMap::<&str, f64>::new();
    let mut note = |name: &'static str, err: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(err);
    };
    for seed in 0..3u64 {
        let mut r = rng::seeded(100 + seed);
        let (n, d) = (10 + r.random_range(0..10), 2 + r.random_range(0..5));
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        let x = Matrix::from_rows(&rows).map_err(|e| e.to_string())?;
        let w: Vec<f64> = (0..=d).map(|_| r.random_range(-1.0..1.0)).collect();
        let lambda = r.random_range(0.0..1.0);
        let g = logistic_loss_grad(&x, &y, lambda, &w);
        let num = numeric_gradient(&mut |q| logistic_loss(&x, &y, lambda, q), &w, H);
        note("logistic regression", max_relative_error(&g, &num, 1e-6));

        let (fin, hidden) = (3 + r.random_range(0..8), 2 + r.random_range(0..6));
        let m = MlpHead::init(fin, hidden, &mut rng::seeded(seed));
        let f: Vec<f64> = (0..fin).map(|_| r.random_range(-1.0..1.0)).collect();
        let cache = m.forward_cached(&f).map_err(|e| e.to_string())?;
        let mut gm = m.zeros_like();
        let df = m.backward(&cache, 1.0, &mut gm);
        note("mlp head", check_params(&m, &gm, |p| p.logit(&f).unwrap(), 1000, seed));
        let num = numeric_gradient(&mut |q| m.logit(q).unwrap(), &f, H);
        note("mlp head", max_relative_error(&df, &num, 1e-6));

        let pick = |r: &mut rng::Rng| {
            [
                1 + 2 * r.random_range(0..2),
                1 + 2 * r.random_range(0..2),
                1 + 2 * r.random_range(0..2),
            ]
        };
        let k = pick(&mut r);
        let s = [
            1 + r.random_range(0..2),
            1 + r.random_range(0..2),
            1 + r.random_range(0..2),
        ];
        let (cin, cout) = (1 + r.random_range(0..3), 1 + r.random_range(0..3));
        let conv = Conv3d::init(cin, cout, k, s, &mut rng::seeded(seed + 10)).map_err(|e| e.to_string())?;
        let x = random_tensor(cin, [5, 4, 3], seed + 20);
        let out = conv.forward(&x).map_err(|e| e.to_string())?;
        let probe = random_tensor(cout, out.dims, seed + 30);
        let mut gc = conv.zeros_like();
        let dx = conv.backward(&x, &probe, &mut gc);
        let loss = |c: &Conv3d, x: &Tensor4| dot(&c.forward(x).unwrap(), &probe);
        note("conv3d", check_params(&conv, &gc, |c| loss(c, &x), 300, seed));
        note("conv3d", check_input(&x, &dx, |x| loss(&conv, x)));

        let ch = 2 + 2 * r.random_range(0..3);
        let mut se = SeModule::init(ch, 2, &mut rng::seeded(seed + 40));
        jitter(&mut se, seed + 41);
        let x = random_tensor(ch, [3, 2, 2], seed + 42);
        let probe = random_tensor(ch, [3, 2, 2], seed + 43);
        let (_, cache) = se.forward_cached(&x);
        let mut gs = se.zeros_like();
        let dx = se.backward(&x, &cache, &probe, &mut gs);
        note(
            "se module",
            check_params(&se, &gs, |s| dot(&s.forward(&x), &probe), 200, seed),
        );
        note("se module", check_input(&x, &dx, |x| dot(&se.forward(x), &probe)));

        let spec = BlockSpec {
            cin: 2 + r.random_range(0..2),
            cout: 2 + 2 * r.random_range(0..2),
            kernel: [3, 3, 1 + 2 * r.random_range(0..2)],
            stride: s,
            norm: NormKind::Instance,
            se_reduction: Some(2),
        };
        let mut block = ResidualBlock::init(&spec, &mut rng::seeded(seed + 50)).map_err(|e| e.to_string())?;
        jitter(&mut block, seed + 51);
        let x = random_tensor(spec.cin, [4, 4, 3], seed + 52);
        let (out, cache) = block.forward_cached(&x).map_err(|e| e.to_string())?;
        let probe = random_tensor(spec.cout, out.dims, seed + 53);
        let mut gb = block.zeros_like();
        let dx = block.backward(&cache, &probe, &mut gb);
        let loss = |b: &ResidualBlock, x: &Tensor4| dot(&b.forward(x).unwrap(), &probe);
        note("residual block", check_params(&block, &gb, |b| loss(b, &x), 300, seed));
        note("residual block", check_input(&x, &dx, |x| loss(&block, x)));

        let mut ae = HarmonizerModel::init(&mut rng::seeded(seed + 60));
        jitter(&mut ae, seed + 61);
        let x = random_tensor(1, [8, 8, 2], seed + 62);
        let target = random_tensor(1, [8, 8, 2], seed + 63);
        let (_, ga) = ae.loss_and_grad(&x, &target, 1e-3).map_err(|e| e.to_string())?;
        note(
            "autoencoder",
            check_params(&ae, &ga, |p| p.loss_and_grad(&x, &target, 1e-3).unwrap().0, 300, seed),
        );
    }
    let summary: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    for (k, v) in &worst {
        ensure(*v < TOL, || format!("{k}: relative error {v:e}"))?;
    }
    within(t, Duration::from_secs(120))?;
    Ok(summary.join(", "))
}

fn pca() -> Result<String, String> {
    let mut r = rng::seeded(6);
    let rows: Vec<Vec<f64>> = (0..20)
        .map(|_| (0..6).map(|j| r.random_range(-1.0..1.0) * (1.0 + j as f64)).collect())
        .collect();
    let x = Matrix::from_rows(&rows).map_err(|e| e.to_string())?;
    let (_, vectors) = jacobi_eigen(&covariance(&rows), 6);
    let (mut ortho, mut angle) = (0.0f64, 0.0f64);
    for k in 1..=6 {
        let m = pca_fit_with(&x, Components::Fixed(k)).map_err(|e| e.to_string())?;
        for (i, a) in m.components.iter().enumerate() {
            for (j, b) in m.components.iter().enumerate() {
                let d: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
                ortho = ortho.max((d - f64::from(u8::from(i == j))).abs());
            }
        }
        angle = angle.max(max_principal_angle(&m.components, &vectors[..k]));
    }
    let full = pca_fit_with(&x, Components::Fixed(6)).map_err(|e| e.to_string())?;
    let scores = pca_transform(&full, &x).map_err(|e| e.to_string())?;
    let mut rec = 0.0f64;
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let back = full.mean[j] + (0..6).map(|c| scores.row(i)[c] * full.components[c][j]).sum::<f64>();
            rec = rec.max((back - v).abs());
        }
    }
    ensure(ortho < 1e-8, || format!("orthonormality {ortho:e}"))?;
    ensure(angle < 1e-6, || format!("principal angle {angle:e}"))?;
    ensure(rec < 1e-6, || format!("reconstruction {rec:e}"))?;
    Ok(format!(
        "orthonormality {ortho:.1e}, angle {angle:.1e}, reconstruction {rec:.1e}"
    ))
}

fn random_net_config(seed: u64) -> SeResNetConfig {
    let mut r = rng::seeded(seed);
    let odd = |r: &mut rng::Rng| {
        [
            1 + 2 * r.random_range(0..2),
            1 + 2 * r.random_range(0..2),
            1 + 2 * r.random_range(0..2),
        ]
    };
    let step = |r: &mut rng::Rng| {
        [
            1 + r.random_range(0..2),
            1 + r.random_range(0..2),
            1 + r.random_range(0..2),
        ]
    };
    let mut c = 1 + r.random_range(0..3);
    SeResNetConfig {
        in_channels: 1,
        stem_kernel: odd(&mut r),
        stem_stride: step(&mut r),
        channels: (0..5)
            .map(|_| {
                c += 1 + r.random_range(0..3);
                c
            })
            .collect(),
        blocks: (0..5).map(|_| 1 + r.random_range(0..2)).collect(),
        kernels: (0..5).map(|_| odd(&mut r)).collect(),
        strides: (0..5).map(|_| step(&mut r)).collect(),
        se_reduction: 1 + r.random_range(0..3),
        se_enabled: r.random_bool(0.7),
        norm: if r.random_bool(0.5) {
            NormKind::Instance
        } else {
            NormKind::None
        },
        head_units: 1 + r.random_range(0..6),
    }
}

fn shape_trace() -> Result<String, String> {
    let cfg = SeResNetConfig::full(StridePlan::Adopted);
    let net = SeResNet::init(&cfg, &mut rng::seeded(1)).map_err(|e| e.to_string())?;
    let out = net
        .forward(&random_volume([192, 192, 36], 2))
        .map_err(|e| e.to_string())?;
    let last = *out.trace.last().ok_or("empty trace")?;
    ensure(out.final_channels == 512 && last == [6, 6, 9], || {
        format!("final map {}x{last:?}", out.final_channels)
    })?;
    ensure(out.probability > 0.0 && out.probability < 1.0, || {
        format!("probability {}", out.probability)
    })?;
    ensure(out.trace == closed_form_trace(&cfg, [192, 192, 36]), || {
        "full trace differs".into()
    })?;
    for seed in 0..20 {
        let c = random_net_config(seed);
        let net = SeResNet::init(&c, &mut rng::seeded(seed)).map_err(|e| e.to_string())?;
        let mut r = rng::seeded(seed + 100);
        let dims = [
            3 + r.random_range(0..14),
            3 + r.random_range(0..14),
            1 + r.random_range(0..9),
        ];
        let o = net
            .forward_tensor(&random_tensor(1, dims, seed))
            .map_err(|e| e.to_string())?;
        ensure(o.trace == closed_form_trace(&c, dims), || {
            format!("config {seed} dims {dims:?}")
        })?;
    }
    Ok(format!(
        "512x{last:?}, p = {:.3}, 20 random configs match",
        out.probability
    ))
}

fn harmonization() -> Result<String, String> {
    let t = Instant::now();
    let spec = PhantomSpec {
        n_patients: 4,
        dims: [32, 32, 8],
        apply_site_shift: false,
        ..PhantomSpec::default()
    };
    let cases = generate(&spec).map_err(|e| e.to_string())?;
    let slices: Vec<Slice2d> = cases
        .iter()
        .map(|c| zscore(&c.axial).map(|v| v.slice_z(4)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let perturb = PerturbationConfig {
        n_variants: 50,
        rng_seed: 1,
        ..PerturbationConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: Some(10),
        ..TrainConfig::default()
    };
    let (model, _) = train_harmonizer(&slices, &perturb, &cfg).map_err(|e| e.to_string())?;
    let held_out = PerturbationConfig {
        n_variants: 20,
        rng_seed: 999,
        ..perturb
    };
    let (mut base, mut fixed) = (0.0, 0.0);
    for s in &slices {
        for v in generate_variants(s, &held_out).map_err(|e| e.to_string())? {
            base += v.mse(s);
            fixed += ae_forward(&model, &v).map_err(|e| e.to_string())?.mse(s);
        }
    }
    let reduction = 1.0 - fixed / base;
    ensure(reduction >= 0.8, || format!("MSE reduction {:.1}%", 100.0 * reduction))?;
    within(t, Duration::from_secs(600))?;
    Ok(format!("held-out MSE reduced by {:.1}%", 100.0 * reduction))
}

fn fstg(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_fstg"))
        .args(args)
        .env_remove("FSTG_THREADS")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || {
        format!("fstg {}: {}", args.join(" "), String::from_utf8_lossy(&o.stderr).trim())
    })
}

fn run_commands(commands: &[&str], config: &Path, out: &Path) -> Result<(), String> {
    for cmd in commands {
        fstg(&[
            cmd,
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])?;
    }
    Ok(())
}

fn end_to_end() -> Result<String, String> {
    let t = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("out");
    let mut aucs = Vec::new();
    for task in ["evi", "mfi"] {
        let config = dir.path().join(format!("{task}.json"));
        let text = format!(
            r#"{{
  "seed": 7,
  "task": "{task}",
  "phantom": {{"n_patients": 60, "contrast": 2.0}},
  "preprocess": {{"axial_patch": [48, 48, 16], "sagittal_patch": [48, 16, 48]}},
  "table": {{"views": ["axial", "sagittal", "fused"], "harmonized": [false], "models": ["umedpt_lr"]}}
}}"#
        );
        std::fs::write(&config, text).map_err(|e| e.to_string())?;
        let stages: &[&str] = if task == "evi" {
            &["phantom-gen", "preprocess", "featurize", "train", "evaluate", "table"]
        } else {
            &["table"]
        };
        run_commands(stages, &config, &out)?;
        let rows: Vec<TableRow> =
            serde_json::from_slice(&std::fs::read(out.join("table/table.json")).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
        let auc = |view: &str| {
            rows.iter()
                .find(|r| r.view.as_str() == view)
                .map(|r| r.report.auc.est)
                .ok_or_else(|| format!("{task}: no {view} row"))
        };
        let (ax, sag, fused) = (auc("axial")?, auc("sagittal")?, auc("fused")?);
        let best_single = ax.max(sag);
        ensure(best_single >= 0.9, || {
            format!("{task}: single-view AUCs {ax:.3}/{sag:.3}")
        })?;
        ensure(fused >= 0.9, || format!("{task}: fused AUC {fused:.3}"))?;
        ensure(fused >= best_single - 0.05, || {
            format!("{task}: fused {fused:.3} vs single {best_single:.3}")
        })?;
        aucs.push(format!("{task} axial {ax:.3} sagittal {sag:.3} fused {fused:.3}"));
    }
    let report: serde_json::Value = serde_json::from_slice(
        &std::fs::read(out.join("reports/umedpt_lr_fused_raw_evi.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    for key in ["auc", "sensitivity", "specificity", "f1", "balanced_acc"] {
        ensure(report[key]["lo"].is_number() && report[key]["hi"].is_number(), || {
            format!("report lacks {key} interval")
        })?;
    }
    within(t, Duration::from_secs(900))?;
    Ok(aucs.join("; "))
}

fn collect_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else if let Ok(bytes) = std::fs::read(&p) {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), bytes);
            }
        }
    }
    out
}

fn json_keys(v: &serde_json::Value, prefix: &str, keys: &mut Vec<String>) {
    if let serde_json::Value::Object(map) = v {
        for (k, child) in map {
            let path = format!("{prefix}{k}");
            json_keys(child, &format!("{path}."), keys);
            keys.push(path);
        }
    }
}

fn reproducibility() -> Result<String, String> {
    const ALL: [&str; 8] = [
        "phantom-gen",
        "preprocess",
        "harmonize-train",
        "harmonize-apply",
        "featurize",
        "train",
        "evaluate",
        "table",
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
  "seed": 5,
  "harmonized": true,
  "phantom": {"n_patients": 20, "dims": [32, 32, 8], "contrast": 2.0},
  "preprocess": {"axial_patch": [16, 16, 8], "sagittal_patch": [16, 8, 16]},
  "harmonize": {"reference_cases": 2, "train": {"epochs": 2}, "perturbation": {"n_variants": 3}},
  "metrics": {"n_bootstrap": 50}
}"#,
    )
    .map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_commands(&ALL, &config, &a)?;
    let first = collect_files(&a);
    run_commands(&ALL, &config, &b)?;
    run_commands(&ALL, &config, &a)?;
    for (label, other) in [
        ("second directory", collect_files(&b)),
        ("rerun in place", collect_files(&a)),
    ] {
        ensure(other.len() == first.len(), || {
            format!("{label}: {} vs {} files", other.len(), first.len())
        })?;
        for (path, bytes) in &first {
            ensure(other.get(path) == Some(bytes), || {
                format!("{label}: {} differs", path.display())
            })?;
        }
    }
    let mut expected_keys = Vec::new();
    json_keys(
        &serde_json::to_value(ExperimentConfig::default()).map_err(|e| e.to_string())?,
        "",
        &mut expected_keys,
    );
    let defaults = design_defaults();
    for cmd in ALL {
        let m: RunManifest = serde_json::from_slice(&first[&PathBuf::from(format!("manifests/{cmd}.json"))])
            .map_err(|e| e.to_string())?;
        let mut keys = Vec::new();
        json_keys(&m.config, "", &mut keys);
        for k in &expected_keys {
            ensure(keys.contains(k), || format!("{cmd} manifest lacks config.{k}"))?;
        }
        ensure(m.defaults == defaults, || {
            format!("{cmd} manifest lacks design defaults")
        })?;
        ensure(!m.config_sha256.is_empty() && !m.versions.is_empty(), || {
            format!("{cmd} manifest incomplete")
        })?;
    }
    Ok(format!(
        "{} files identical across 3 runs; manifests list {} config fields and {} fixed defaults",
        first.len(),
        expected_keys.len(),
        defaults.len()
    ))
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, Check); 10] = [
        ("FFT oracle", fft_oracle),
        ("metric formulas", metric_formulas),
        ("AUC oracle", auc_oracle),
        ("bootstrap", bootstrap),
        ("gradient checks", gradient_checks),
        ("PCA", pca),
        ("SE-ResNet shape trace", shape_trace),
        ("harmonization efficacy", harmonization),
        ("end-to-end phantom run", end_to_end),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| *f == n.to_string() || name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:2} FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
