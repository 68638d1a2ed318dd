use std::collections::HashMap;
use std::fmt::Write as _;

use fstg_core::augment::random_augment;
use fstg_core::features::{
    format_feature_records, fuse_views, grouper_aggregate, parse_feature_records, train_mlp_classifier, GrouperMode,
    MlpClassifier, MlpTrainConfig, SliceFeatureStack, ToyEncoder,
};
use fstg_core::freq::{harmonize_volume, train_harmonizer, HarmonizerModel, PerturbationConfig, TrainConfig};
use fstg_core::learn::{logreg_fit, logreg_predict, pca_fit, pca_transform, LrModel, Matrix, PcaModel};
use fstg_core::metrics::{
    evaluate_run, metrics_csv, roc_csv, roc_curve, roc_svg, BootstrapConfig, EvalReport, PredictionSet, Task,
};
use fstg_core::nn::persist::{decode_seresnet, encode_seresnet};
use fstg_core::nn::{train_toy, SeResNet, SeResNetConfig, ToyTrainConfig};
use fstg_core::phantom::{generate, split_dataset, PhantomSpec};
use fstg_core::preprocess::{center_crop, extract_roi, PatchSpec, RoiConfig};
use fstg_core::rng;
use fstg_core::volume::{nifti, raw, resample_trilinear};
use fstg_core::{LabelMask, Plane, Volume};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Fusion, ModelKind};
use crate::dataset::Read;
use crate::dataset::{
    feature_rel, harmonizer_rel, patch_rel, CaseEntry, Dataset, DatasetManifest, SplitTag, ViewEntry,
};
use crate::error::{CliError, CliResult};
use crate::run::Run;

const PLANES: [Plane; 2] = [Plane::Axial, Plane::Sagittal];

pub fn phantom_gen(run: &mut Run) -> CliResult<()> {
    let spec = PhantomSpec {
        seed: run.seeds.phantom,
        ..run.cfg.phantom.clone()
    };
    let cases = generate(&spec)?;
    let labels: Vec<(u8, u8)> = cases.iter().map(|c| (c.evi, c.mfi)).collect();
    let split = split_dataset(&labels, run.cfg.split[0], run.cfg.split[1], run.seeds.split)?;
    let tag = |i: usize| {
        if split.test.contains(&i) {
            SplitTag::Test
        } else if split.val.contains(&i) {
            SplitTag::Val
        } else {
            SplitTag::Train
        }
    };
    let encoded: Vec<CliResult<Written>> = cases
        .par_iter()
        .map(|c| {
            let mut files = Vec::new();
            for (plane, vol, mask) in [
                (Plane::Axial, &c.axial, &c.axial_mask),
                (Plane::Sagittal, &c.sagittal, &c.sagittal_mask),
            ] {
                files.push((format!("cases/{}_{plane}.nii", c.id), nifti::encode(vol)?));
                files.push((
                    format!("cases/{}_{plane}_mask.nii", c.id),
                    nifti::encode(&mask.to_volume(plane))?,
                ));
            }
            Ok(files)
        })
        .collect();
    for files in encoded {
        for (rel, bytes) in files? {
            run.write(&format!("phantom/{rel}"), &bytes)?;
        }
    }
    let entries = cases
        .iter()
        .enumerate()
        .map(|(i, c)| CaseEntry {
            id: c.id.clone(),
            views: PLANES
                .iter()
                .map(|&p| ViewEntry {
                    plane: p,
                    image: format!("cases/{}_{p}.nii", c.id),
                    mask: format!("cases/{}_{p}_mask.nii", c.id),
                })
                .collect(),
            evi: c.evi,
            mfi: c.mfi,
            site: c.site,
            split: tag(i),
        })
        .collect();
    run.write_json(
        "phantom/manifest.json",
        &DatasetManifest {
            format: 1,
            cases: entries,
        },
    )
}

fn patch_spec(run: &Run, plane: Plane) -> CliResult<PatchSpec> {
    let size = match plane {
        Plane::Sagittal => run.cfg.preprocess.sagittal_patch,
        _ => run.cfg.preprocess.axial_patch,
    };
    PatchSpec::new(size).map_err(|e| CliError::Config(e.to_string()))
}

/// Output files as (relative path, bytes).
type Written = Vec<(String, Vec<u8>)>;

pub fn preprocess(run: &mut Run) -> CliResult<()> {
    let ds = Dataset::load(run)?;
    let p = run.cfg.preprocess.clone();
    let specs = [patch_spec(run, Plane::Axial)?, patch_spec(run, Plane::Sagittal)?];
    let results: Vec<CliResult<(Read, Written)>> = ds
        .manifest
        .cases
        .par_iter()
        .map(|c| {
            let mut reads = Vec::new();
            let mut outs = Vec::new();
            for view in &c.views {
                let (mut vol, mut mask, r) = ds.read_view(run, view)?;
                reads.extend(r);
                if let Some(target) = p.target_spacing {
                    vol = resample_trilinear(&vol, target)?;
                    mask = LabelMask::from_volume(&resample_trilinear(&mask.to_volume(view.plane), target)?);
                }
                let roi = RoiConfig {
                    patch: specs[usize::from(view.plane == Plane::Sagittal)],
                    clip_lo: p.clip_lo,
                    clip_hi: p.clip_hi,
                    order: p.order,
                };
                let patch = extract_roi(&vol, &mask, &roi)?;
                outs.push((patch_rel(false, &c.id, view.plane), raw::encode(&patch)));
            }
            Ok((reads, outs))
        })
        .collect();
    for r in results {
        let (reads, outs) = r?;
        for (path, bytes) in reads {
            run.note_input(&path, &bytes);
        }
        for (rel, bytes) in outs {
            run.write(&rel, &bytes)?;
        }
    }
    Ok(())
}

fn read_patch(run: &Run, harmonized: bool, id: &str, plane: Plane) -> CliResult<(Volume, Read)> {
    let path = run.path(&patch_rel(harmonized, id, plane));
    let bytes = run.read(&path)?;
    let vol = raw::decode(&bytes)?.with_plane(plane);
    Ok((vol, vec![(path, bytes)]))
}

fn note_all(run: &mut Run, reads: Read) {
    for (path, bytes) in reads {
        run.note_input(&path, &bytes);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HarmonizerLog {
    plane: Plane,
    reference_cases: Vec<String>,
    slices: usize,
    pairs: usize,
    epoch_losses: Vec<f64>,
}

pub fn harmonize_train(run: &mut Run) -> CliResult<()> {
    let ds = Dataset::load(run)?;
    let h = run.cfg.harmonize.clone();
    let refs: Vec<CaseEntry> = ds
        .ids(&[SplitTag::Train])
        .into_iter()
        .take(h.reference_cases)
        .cloned()
        .collect();
    if refs.is_empty() {
        return Err(CliError::Config(
            "no training cases for the harmonizer reference set".into(),
        ));
    }
    for plane in PLANES {
        let size = patch_spec(run, plane)?.size;
        if size[0] % 8 != 0 || size[1] % 8 != 0 {
            return Err(CliError::Config(format!(
                "{plane} patch {size:?} must have in-plane sizes divisible by 8 for harmonization"
            )));
        }
        let mut slices = Vec::new();
        let mut ids = Vec::new();
        for c in refs.iter().filter(|c| c.view(plane).is_some()) {
            let (vol, reads) = read_patch(run, false, &c.id, plane)?;
            note_all(run, reads);
            let nz = vol.dims()[2];
            let k = h.slices_per_case.min(nz);
            let start = nz / 2 - k / 2;
            slices.extend((start..start + k).map(|z| vol.slice_z(z)));
            ids.push(c.id.clone());
        }
        if slices.is_empty() {
            continue;
        }
        let perturb = PerturbationConfig {
            rng_seed: run.seeds.perturbation,
            ..h.perturbation.clone()
        };
        let train = TrainConfig {
            seed: run.seeds.harmonizer,
            ..h.train.clone()
        };
        let (model, report) = train_harmonizer(&slices, &perturb, &train)?;
        run.write(&harmonizer_rel(plane), &model.encode())?;
        run.write_json(
            &format!("harmonizer/{plane}_training.json"),
            &HarmonizerLog {
                plane,
                reference_cases: ids,
                slices: slices.len(),
                pairs: report.pairs,
                epoch_losses: report.epoch_losses,
            },
        )?;
    }
    Ok(())
}

fn load_harmonizer(run: &mut Run, plane: Plane) -> CliResult<HarmonizerModel> {
    let path = run.path(&harmonizer_rel(plane));
    let bytes = run.read_noted(&path)?;
    Ok(HarmonizerModel::decode(&bytes)?)
}

pub fn harmonize_apply(run: &mut Run) -> CliResult<()> {
    let ds = Dataset::load(run)?;
    let mut models = HashMap::new();
    for plane in PLANES {
        if ds.manifest.cases.iter().any(|c| c.view(plane).is_some()) {
            models.insert(plane, load_harmonizer(run, plane)?);
        }
    }
    let results: Vec<CliResult<(Read, Written)>> = ds
        .manifest
        .cases
        .par_iter()
        .map(|c| {
            let mut reads = Vec::new();
            let mut outs = Vec::new();
            for view in &c.views {
                let (vol, r) = read_patch(run, false, &c.id, view.plane)?;
                reads.extend(r);
                let out = harmonize_volume(&models[&view.plane], &vol)?;
                outs.push((patch_rel(true, &c.id, view.plane), raw::encode(&out)));
            }
            Ok((reads, outs))
        })
        .collect();
    for r in results {
        let (reads, outs) = r?;
        note_all(run, reads);
        for (rel, bytes) in outs {
            run.write(&rel, &bytes)?;
        }
    }
    Ok(())
}

/// Harmonized inputs need the harmonizer; its absence is a missing input
/// even when stale harmonized files exist.
fn require_harmonizer(run: &Run, ds: &Dataset) -> CliResult<()> {
    for plane in PLANES {
        if ds.manifest.cases.iter().any(|c| c.view(plane).is_some()) {
            run.require(&run.path(&harmonizer_rel(plane)))?;
        }
    }
    Ok(())
}

pub fn featurize(run: &mut Run) -> CliResult<()> {
    let ds = Dataset::load(run)?;
    if let Some(ext) = run.cfg.features.external_file.clone() {
        if run.cfg.harmonized {
            return Err(CliError::Config(
                "external features are used as-is; set harmonized to false".into(),
            ));
        }
        let bytes = run.read_noted(&ext)?;
        let text = String::from_utf8(bytes).map_err(|_| CliError::Config("feature file is not UTF-8".into()))?;
        let stacks = parse_feature_records(&text)?;
        run.write(&feature_rel(false), format_feature_records(&stacks)?.as_bytes())?;
        return Ok(());
    }
    let encoder = ToyEncoder::new(run.seeds.encoder);
    let kinds: &[bool] = if run.cfg.harmonized { &[false, true] } else { &[false] };
    for &harmonized in kinds {
        if harmonized {
            require_harmonizer(run, &ds)?;
        }
        let results: Vec<CliResult<(Read, Vec<SliceFeatureStack>)>> = ds
            .manifest
            .cases
            .par_iter()
            .map(|c| {
                let mut reads = Vec::new();
                let mut stacks = Vec::new();
                for view in &c.views {
                    let (vol, r) = read_patch(run, harmonized, &c.id, view.plane)?;
                    reads.extend(r);
                    let vectors: Vec<Vec<f64>> = vol.slices_z().iter().map(|s| encoder.encode(s)).collect();
                    let idx = (0..vectors.len()).collect();
                    stacks.push(SliceFeatureStack::new(c.id.clone(), view.plane, idx, vectors)?);
                }
                Ok((reads, stacks))
            })
            .collect();
        let mut all = Vec::new();
        for r in results {
            let (reads, stacks) = r?;
            note_all(run, reads);
            all.extend(stacks);
        }
        run.write(&feature_rel(harmonized), format_feature_records(&all)?.as_bytes())?;
    }
    Ok(())
}

type Stacks = HashMap<(String, Plane), SliceFeatureStack>;

fn load_stacks(run: &mut Run, harmonized: bool) -> CliResult<Stacks> {
    let path = run.path(&feature_rel(harmonized));
    let bytes = run.read_noted(&path)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::Config("feature file is not UTF-8".into()))?;
    Ok(parse_feature_records(&text)?
        .into_iter()
        .map(|s| ((s.patient.clone(), s.plane), s))
        .collect())
}

fn stack<'a>(stacks: &'a Stacks, id: &str, plane: Plane) -> CliResult<&'a SliceFeatureStack> {
    stacks
        .get(&(id.to_string(), plane))
        .ok_or_else(|| CliError::Config(format!("no {plane} features for case {id}")))
}

fn volume_vector(stacks: &Stacks, id: &str, fusion: Fusion) -> CliResult<Vec<f64>> {
    let agg = |plane| -> CliResult<Vec<f64>> {
        Ok(grouper_aggregate(
            stack(stacks, id, plane)?,
            &GrouperMode::FrozenUniform,
        )?)
    };
    Ok(match fusion {
        Fusion::Axial => agg(Plane::Axial)?,
        Fusion::Sagittal => agg(Plane::Sagittal)?,
        Fusion::Fused => fuse_views(&agg(Plane::Axial)?, &agg(Plane::Sagittal)?)?,
    })
}

fn single_plane(fusion: Fusion, kind: ModelKind) -> CliResult<Plane> {
    match fusion {
        Fusion::Axial => Ok(Plane::Axial),
        Fusion::Sagittal => Ok(Plane::Sagittal),
        Fusion::Fused => Err(CliError::Config(format!(
            "{} takes a single view; fused input is only available for umedpt_lr",
            kind.as_str()
        ))),
    }
}

/// A fitted classifier with the settings it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: ModelKind,
    pub fusion: Fusion,
    pub harmonized: bool,
    pub task: Task,
    pub train_cases: Vec<String>,
    pub pca: Option<PcaModel>,
    pub lr: Option<LrModel>,
    pub mlp: Option<MlpClassifier>,
    /// Weight file of the SE-ResNet, relative to the output directory.
    pub seresnet_weights: Option<String>,
    pub seresnet_patch: Option<[usize; 3]>,
    pub training_losses: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct Variant {
    pub kind: ModelKind,
    pub fusion: Fusion,
    pub harmonized: bool,
    pub task: Task,
}

impl Variant {
    pub fn from_config(run: &Run) -> Self {
        Variant {
            kind: run.cfg.model,
            fusion: run.cfg.fusion,
            harmonized: run.cfg.harmonized,
            task: run.cfg.task,
        }
    }

    /// Rejects combinations no model supports, before any input is read.
    pub fn check(&self) -> CliResult<()> {
        if self.kind != ModelKind::UmedptLr {
            single_plane(self.fusion, self.kind)?;
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        format!(
            "{}_{}_{}_{}",
            self.kind.as_str(),
            self.fusion.as_str(),
            if self.harmonized { "harmonized" } else { "raw" },
            self.task.as_str()
        )
    }
}

fn seresnet_input(run: &Run, harmonized: bool, id: &str, plane: Plane) -> CliResult<(Volume, Read)> {
    let (vol, reads) = read_patch(run, harmonized, id, plane)?;
    let d = vol.dims();
    let center = [(d[0] / 2) as f64, (d[1] / 2) as f64, (d[2] / 2) as f64];
    let spec = PatchSpec::new(run.cfg.seresnet.patch).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((center_crop(&vol, center, &spec)?, reads))
}

enum Fitted {
    Linear(PcaModel, LrModel),
    Mlp(MlpClassifier),
    Net(Box<SeResNet>),
}

fn fit(run: &mut Run, ds: &Dataset, v: Variant) -> CliResult<(ModelFile, Fitted)> {
    let train: Vec<&CaseEntry> = ds.ids(&[SplitTag::Train, SplitTag::Val]);
    let ids: Vec<String> = train.iter().map(|c| c.id.clone()).collect();
    let labels: Vec<u8> = train.iter().map(|c| c.label(v.task)).collect();
    if v.harmonized {
        require_harmonizer(run, ds)?;
    }
    let mut file = ModelFile {
        kind: v.kind,
        fusion: v.fusion,
        harmonized: v.harmonized,
        task: v.task,
        train_cases: ids.clone(),
        pca: None,
        lr: None,
        mlp: None,
        seresnet_weights: None,
        seresnet_patch: None,
        training_losses: Vec::new(),
    };
    let fitted = match v.kind {
        ModelKind::UmedptLr => {
            let stacks = load_stacks(run, v.harmonized)?;
            let rows = ids
                .iter()
                .map(|id| volume_vector(&stacks, id, v.fusion))
                .collect::<CliResult<Vec<_>>>()?;
            let x = Matrix::from_rows(&rows)?;
            let pca = pca_fit(&x, run.cfg.pca_variance)?;
            let lr = logreg_fit(&pca_transform(&pca, &x)?, &labels, run.cfg.lr_lambda)?;
            file.pca = Some(pca.clone());
            file.lr = Some(lr.clone());
            Fitted::Linear(pca, lr)
        }
        ModelKind::MlpHead => {
            let plane = single_plane(v.fusion, v.kind)?;
            let stacks = load_stacks(run, v.harmonized)?;
            let samples = ids
                .iter()
                .zip(&labels)
                .map(|(id, &y)| Ok((stack(&stacks, id, plane)?.clone(), y)))
                .collect::<CliResult<Vec<_>>>()?;
            let cfg = MlpTrainConfig {
                seed: run.seeds.mlp,
                ..run.cfg.mlp.clone()
            };
            let (model, losses) = train_mlp_classifier(&samples, &cfg)?;
            file.mlp = Some(model.clone());
            file.training_losses = losses;
            Fitted::Mlp(model)
        }
        ModelKind::SeresnetToy => {
            let plane = single_plane(v.fusion, v.kind)?;
            let mut samples = Vec::with_capacity(ids.len());
            for (i, (id, &y)) in ids.iter().zip(&labels).enumerate() {
                let (mut vol, reads) = seresnet_input(run, v.harmonized, id, plane)?;
                note_all(run, reads);
                if let Some(aug) = &run.cfg.seresnet.augment {
                    vol = random_augment(&vol, aug, &mut rng::stream(run.seeds.augment, i as u64))?;
                }
                samples.push((vol, y));
            }
            let tcfg = ToyTrainConfig {
                seed: run.seeds.seresnet,
                ..run.cfg.seresnet.train.clone()
            };
            let (net, report) = train_toy(&SeResNetConfig::toy(), &samples, &tcfg)?;
            file.training_losses = report.losses;
            file.seresnet_patch = Some(run.cfg.seresnet.patch);
            Fitted::Net(Box::new(net))
        }
    };
    Ok((file, fitted))
}

fn score(run: &mut Run, file: &ModelFile, fitted: &Fitted, cases: &[&CaseEntry]) -> CliResult<Vec<f64>> {
    let stacks = match fitted {
        Fitted::Net(_) => HashMap::new(),
        _ => load_stacks(run, file.harmonized)?,
    };
    let mut out = Vec::with_capacity(cases.len());
    for c in cases {
        let s = match fitted {
            Fitted::Linear(pca, lr) => {
                let x = Matrix::from_rows(&[volume_vector(&stacks, &c.id, file.fusion)?])?;
                logreg_predict(lr, pca_transform(pca, &x)?.row(0))?
            }
            Fitted::Mlp(m) => m.predict(stack(&stacks, &c.id, single_plane(file.fusion, file.kind)?)?)?,
            Fitted::Net(net) => {
                let plane = single_plane(file.fusion, file.kind)?;
                let (vol, reads) = seresnet_input(run, file.harmonized, &c.id, plane)?;
                note_all(run, reads);
                net.forward(&vol)?.probability
            }
        };
        out.push(s);
    }
    Ok(out)
}

pub fn train(run: &mut Run) -> CliResult<()> {
    let v = Variant::from_config(run);
    v.check()?;
    let ds = Dataset::load(run)?;
    let (mut file, fitted) = fit(run, &ds, v)?;
    let name = v.name();
    if let Fitted::Net(net) = &fitted {
        let rel = format!("models/{name}.fsrn");
        run.write(&rel, &encode_seresnet(net))?;
        file.seresnet_weights = Some(rel);
    }
    run.write_json(&format!("models/{name}.json"), &file)
}

fn load_model(run: &mut Run, name: &str) -> CliResult<(ModelFile, Fitted)> {
    let path = run.path(&format!("models/{name}.json"));
    let bytes = run.read_noted(&path)?;
    let file: ModelFile =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("model file {}: {e}", path.display())))?;
    let fitted = match file.kind {
        ModelKind::UmedptLr => match (&file.pca, &file.lr) {
            (Some(p), Some(l)) => Fitted::Linear(p.clone(), l.clone()),
            _ => return Err(CliError::Config(format!("{name} lacks PCA or LR parameters"))),
        },
        ModelKind::MlpHead => Fitted::Mlp(
            file.mlp
                .clone()
                .ok_or_else(|| CliError::Config(format!("{name} lacks MLP parameters")))?,
        ),
        ModelKind::SeresnetToy => {
            let rel = file
                .seresnet_weights
                .clone()
                .ok_or_else(|| CliError::Config(format!("{name} lacks a weight file")))?;
            let bytes = run.read_noted(&run.path(&rel))?;
            Fitted::Net(Box::new(decode_seresnet(&bytes)?))
        }
    };
    Ok((file, fitted))
}

fn bootstrap_config(run: &Run) -> BootstrapConfig {
    BootstrapConfig {
        n_iter: run.cfg.metrics.n_bootstrap,
        level: run.cfg.metrics.level,
        seed: run.seeds.bootstrap,
        threshold: run.cfg.metrics.threshold,
    }
}

fn test_predictions(
    run: &mut Run,
    ds: &Dataset,
    file: &ModelFile,
    fitted: &Fitted,
) -> CliResult<(Vec<String>, PredictionSet)> {
    let test = ds.ids(&[SplitTag::Test]);
    let scores = score(run, file, fitted, &test)?;
    let labels = test.iter().map(|c| c.label(file.task)).collect();
    let ids = test.iter().map(|c| c.id.clone()).collect();
    Ok((ids, PredictionSet::new(file.task, labels, scores)?))
}

pub fn evaluate(run: &mut Run) -> CliResult<()> {
    let v = Variant::from_config(run);
    v.check()?;
    let ds = Dataset::load(run)?;
    if v.harmonized {
        require_harmonizer(run, &ds)?;
    }
    let name = v.name();
    let (file, fitted) = load_model(run, &name)?;
    let (ids, preds) = test_predictions(run, &ds, &file, &fitted)?;
    let report = evaluate_run(&preds, &bootstrap_config(run))?;
    let roc = roc_curve(&preds)?;
    let mut per_case = String::from("id,label,score\n");
    for ((id, y), s) in ids.iter().zip(&preds.labels).zip(&preds.scores) {
        let _ = writeln!(per_case, "{id},{y},{s}");
    }
    run.write_json(&format!("reports/{name}.json"), &report)?;
    run.write(
        &format!("reports/{name}.csv"),
        metrics_csv(&[(name.clone(), report)]).as_bytes(),
    )?;
    run.write(&format!("reports/{name}_roc.csv"), roc_csv(&roc).as_bytes())?;
    run.write(
        &format!("reports/{name}_roc.svg"),
        roc_svg(&[(name.clone(), roc)]).as_bytes(),
    )?;
    run.write(&format!("reports/{name}_predictions.csv"), per_case.as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub view: Fusion,
    pub input: String,
    pub model: ModelKind,
    pub report: EvalReport,
}

pub const TABLE_PREFIX: &str = "view,input,model,task";

pub fn table(run: &mut Run) -> CliResult<()> {
    let ds = Dataset::load(run)?;
    let grid = run.cfg.table.clone();
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for &harmonized in &grid.harmonized {
        for &view in &grid.views {
            for &kind in &grid.models {
                if kind != ModelKind::UmedptLr && view == Fusion::Fused {
                    continue;
                }
                let v = Variant {
                    kind,
                    fusion: view,
                    harmonized,
                    task: run.cfg.task,
                };
                let (file, fitted) = fit(run, &ds, v)?;
                let (_, preds) = test_predictions(run, &ds, &file, &fitted)?;
                let report = evaluate_run(&preds, &bootstrap_config(run))?;
                curves.push((v.name(), roc_curve(&preds)?));
                rows.push(TableRow {
                    view,
                    input: if harmonized { "harmonized" } else { "original" }.to_string(),
                    model: kind,
                    report,
                });
            }
        }
    }
    let labelled: Vec<(String, EvalReport)> = rows.iter().map(|r| (String::new(), r.report.clone())).collect();
    let body = metrics_csv(&labelled);
    let mut csv = String::new();
    for (i, line) in body.lines().enumerate() {
        // swap the single label column for the grid coordinates
        let rest = &line[line.find(',').map_or(line.len(), |p| p + 1)..];
        if i == 0 {
            let _ = writeln!(csv, "{TABLE_PREFIX},{rest}");
        } else {
            let r = &rows[i - 1];
            let _ = writeln!(
                csv,
                "{},{},{},{},{rest}",
                r.view.as_str(),
                r.input,
                r.model.as_str(),
                r.report.task.as_str()
            );
        }
    }
    run.write("table/table.csv", csv.as_bytes())?;
    run.write_json("table/table.json", &rows)?;
    run.write("table/roc.svg", roc_svg(&curves).as_bytes())?;
    Ok(())
}
