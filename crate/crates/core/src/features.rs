//! Per-slice feature vectors, slice-to-volume aggregation, view fusion and
//! the tab-separated feature-record format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{weighted_bce_logit, MlpHead};
use crate::nn::{Adam, Params};
use crate::rng;
use crate::volume::{Plane, Slice2d};

pub const FEATURE_DIM: usize = 512;
pub const FUSED_DIM: usize = 2 * FEATURE_DIM;
const GRID: usize = 4;
const STATS: usize = GRID * GRID * 4;

/// Ordered per-slice feature vectors of one patient and plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceFeatureStack {
    pub patient: String,
    pub plane: Plane,
    pub slice_indices: Vec<usize>,
    pub vectors: Vec<Vec<f64>>,
}

impl SliceFeatureStack {
    pub fn new(
        patient: impl Into<String>,
        plane: Plane,
        slice_indices: Vec<usize>,
        vectors: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyStack);
        }
        if slice_indices.len() != vectors.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} slice indices for {} vectors",
                slice_indices.len(),
                vectors.len()
            )));
        }
        let dim = vectors[0].len();
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(i));
            }
        }
        Ok(SliceFeatureStack {
            patient: patient.into(),
            plane,
            slice_indices,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Stand-in slice encoder: 4x4 grid pooling (mean, std, max, min per cell)
/// followed by a fixed Gaussian projection drawn from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    pub seed: u64,
    projection: Vec<f64>,
}

impl ToyEncoder {
    pub fn new(seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let normal = Normal::new(0.0, 1.0 / (STATS as f64).sqrt()).expect("valid sigma");
        let projection = (0..FEATURE_DIM * STATS).map(|_| normal.sample(&mut rng)).collect();
        ToyEncoder { seed, projection }
    }

    /// The 64 pooled statistics of a slice.
    pub fn pooled_stats(slice: &Slice2d) -> Vec<f64> {
        let (w, h) = (slice.width, slice.height);
        let span = |i: usize, n: usize| {
            let lo = (i * n / GRID).min(n - 1);
            let hi = ((i + 1) * n / GRID).max(lo + 1).min(n);
            lo..hi
        };
        let mut out = Vec::with_capacity(STATS);
        for gy in 0..GRID {
            for gx in 0..GRID {
                let (mut sum, mut sq, mut hi, mut lo, mut n) = (0.0, 0.0, f64::NEG_INFINITY, f64::INFINITY, 0.0);
                for y in span(gy, h) {
                    for x in span(gx, w) {
                        let v = slice.get(x, y);
                        sum += v;
                        sq += v * v;
                        hi = hi.max(v);
                        lo = lo.min(v);
                        n += 1.0;
                    }
                }
                let mean = sum / n;
                out.extend([mean, (sq / n - mean * mean).max(0.0).sqrt(), hi, lo]);
            }
        }
        out
    }

    pub fn encode(&self, slice: &Slice2d) -> Vec<f64> {
        let stats = Self::pooled_stats(slice);
        self.projection
            .chunks_exact(STATS)
            .map(|row| row.iter().zip(&stats).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// One-shot form of [`ToyEncoder::encode`].
pub fn toy_encoder(slice: &Slice2d, seed: u64) -> Vec<f64> {
    ToyEncoder::new(seed).encode(slice)
}

/// Linear-score softmax attention over slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrouperModel {
    pub w: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrouperMode {
    Learned(GrouperModel),
    FrozenUniform,
}

impl GrouperModel {
    pub fn zeros(dim: usize) -> Self {
        GrouperModel {
            w: vec![0.0; dim],
            b: 0.0,
        }
    }

    /// Attention weights `softmax(w.f_i + b)`.
    pub fn weights(&self, stack: &SliceFeatureStack) -> Result<Vec<f64>> {
        if self.w.len() != stack.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                got: stack.dim(),
            });
        }
        let scores: Vec<f64> = stack.vectors.iter().map(|f| dot(&self.w, f) + self.b).collect();
        let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
        let z: f64 = e.iter().sum();
        Ok(e.into_iter().map(|v| v / z).collect())
    }

    /// Accumulates the parameter gradient for `dL/d(output)`.
    pub fn backward(&self, stack: &SliceFeatureStack, alpha: &[f64], dout: &[f64], grads: &mut GrouperModel) {
        let proj: Vec<f64> = stack.vectors.iter().map(|f| dot(dout, f)).collect();
        let mean: f64 = alpha.iter().zip(&proj).map(|(a, p)| a * p).sum();
        for ((f, a), p) in stack.vectors.iter().zip(alpha).zip(&proj) {
            let ds = a * (p - mean);
            for (g, x) in grads.w.iter_mut().zip(f) {
                *g += ds * x;
            }
            grads.b += ds;
        }
    }
}

impl Params for GrouperModel {
    fn params(&self) -> Vec<&[f64]> {
        vec![&self.w, std::slice::from_ref(&self.b)]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w, std::slice::from_mut(&mut self.b)]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn weighted_sum(stack: &SliceFeatureStack, alpha: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; stack.dim()];
    for (f, a) in stack.vectors.iter().zip(alpha) {
        for (o, x) in out.iter_mut().zip(f) {
            *o += a * x;
        }
    }
    out
}

/// Slice-to-volume aggregation `sum alpha_i f_i`.
pub fn grouper_aggregate(stack: &SliceFeatureStack, mode: &GrouperMode) -> Result<Vec<f64>> {
    if stack.is_empty() {
        return Err(Error::EmptyStack);
    }
    match mode {
        GrouperMode::FrozenUniform => {
            let n = stack.len() as f64;
            let mut out = vec![0.0; stack.dim()];
            for f in &stack.vectors {
                for (o, x) in out.iter_mut().zip(f) {
                    *o += x;
                }
            }
            Ok(out.into_iter().map(|v| v / n).collect())
        }
        GrouperMode::Learned(m) => Ok(weighted_sum(stack, &m.weights(stack)?)),
    }
}

/// Axial-first concatenation of two 512-d volume vectors.
pub fn fuse_views(axial: &[f64], sagittal: &[f64]) -> Result<Vec<f64>> {
    if axial.len() != FEATURE_DIM || sagittal.len() != FEATURE_DIM {
        return Err(Error::LengthMismatch {
            axial: axial.len(),
            sagittal: sagittal.len(),
        });
    }
    let mut out = Vec::with_capacity(FUSED_DIM);
    out.extend_from_slice(axial);
    out.extend_from_slice(sagittal);
    Ok(out)
}

/// Header line of the text feature format.
pub fn feature_header(dim: usize) -> String {
    format!("FSTG-FEAT v1 dim={dim}")
}

fn parse_header(line: &str) -> Result<usize> {
    let bad = |reason: &str| Error::MalformedRecord {
        line: 1,
        reason: reason.to_string(),
    };
    let rest = line
        .trim_end_matches('\r')
        .strip_prefix("FSTG-FEAT v1 dim=")
        .ok_or_else(|| bad("expected 'FSTG-FEAT v1 dim=<n>' header"))?;
    let dim: usize = rest.parse().map_err(|_| bad("dimension is not an integer"))?;
    if dim == 0 || dim > 1 << 20 {
        return Err(bad("dimension out of range"));
    }
    Ok(dim)
}

/// Ids must be non-empty and free of the record separators.
fn writable_id(id: &str) -> bool {
    !id.is_empty() && !id.contains(['\t', '\n', '\r'])
}

/// Parses a feature file; stacks are grouped by `(patient, plane)` in order
/// of first appearance and keep file order within each stack.
pub fn parse_feature_records(text: &str) -> Result<Vec<SliceFeatureStack>> {
    let mut lines = text.split('\n');
    let dim = parse_header(lines.next().unwrap_or(""))?;
    let mut order: Vec<(String, Plane)> = Vec::new();
    type Group = (Vec<usize>, Vec<Vec<f64>>);
    let mut groups: HashMap<(String, Plane), Group> = HashMap::new();
    for (i, raw) in lines.enumerate() {
        let line_no = i + 2;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| Error::MalformedRecord { line: line_no, reason };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 tab-separated fields, found {}", fields.len())));
        }
        let patient = fields[0];
        if !writable_id(patient) {
            return Err(bad(format!("patient id {patient:?} is empty or holds a line break")));
        }
        let plane: Plane = fields[1]
            .parse()
            .map_err(|_| bad(format!("unknown plane '{}'", fields[1])))?;
        let slice: usize = fields[2]
            .parse()
            .map_err(|_| bad(format!("slice index '{}' is not an integer", fields[2])))?;
        let mut values = Vec::with_capacity(dim);
        for tok in fields[3].split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| bad(format!("'{tok}' is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value '{tok}'")));
            }
            values.push(v);
            if values.len() > dim {
                break;
            }
        }
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: if values.len() > dim {
                    fields[3].split(',').count()
                } else {
                    values.len()
                },
            });
        }
        let key = (patient.to_string(), plane);
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (Vec::new(), Vec::new())
        });
        entry.0.push(slice);
        entry.1.push(values);
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let (slices, vectors) = groups.remove(&key).expect("key recorded on insert");
            SliceFeatureStack {
                patient: key.0,
                plane: key.1,
                slice_indices: slices,
                vectors,
            }
        })
        .collect())
}

pub fn load_feature_file(path: impl AsRef<Path>) -> Result<Vec<SliceFeatureStack>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_feature_records(&text)
}

/// Serializes stacks; values use the shortest round-trip float text.
pub fn format_feature_records(stacks: &[SliceFeatureStack]) -> Result<String> {
    let dim = stacks.first().map_or(FEATURE_DIM, SliceFeatureStack::dim);
    let mut out = feature_header(dim);
    out.push('\n');
    for s in stacks {
        if !writable_id(&s.patient) {
            return Err(Error::InvalidArgument(format!(
                "patient id {:?} cannot be written",
                s.patient
            )));
        }
        for (idx, v) in s.slice_indices.iter().zip(&s.vectors) {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            let _ = write!(out, "{}\t{}\t{}\t", s.patient, s.plane, idx);
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{x:?}");
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn write_feature_file(path: impl AsRef<Path>, stacks: &[SliceFeatureStack]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_feature_records(stacks)?).map_err(|e| Error::io(path, e))
}

/// MLP head with a jointly trained grouper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    pub grouper: GrouperModel,
    pub head: MlpHead,
}

impl Params for MlpClassifier {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.grouper.params();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.grouper.params_mut();
        p.extend(self.head.params_mut());
        p
    }
}

impl MlpClassifier {
    pub fn predict(&self, stack: &SliceFeatureStack) -> Result<f64> {
        let f = grouper_aggregate(stack, &GrouperMode::Learned(self.grouper.clone()))?;
        self.head.forward(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    /// Positive-class weight; `None` uses `n_neg / n_pos`.
    pub w_pos: Option<f64>,
    pub seed: u64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        MlpTrainConfig {
            epochs: 200,
            lr: 5e-4,
            weight_decay: 1e-2,
            hidden: MlpHead::DEFAULT_HIDDEN,
            w_pos: None,
            seed: 0,
        }
    }
}

/// Full-batch AdamW fine-tuning of grouper and head under weighted binary
/// cross-entropy with cosine-annealed step size. Returns the per-epoch loss.
pub fn train_mlp_classifier(
    samples: &[(SliceFeatureStack, u8)],
    cfg: &MlpTrainConfig,
) -> Result<(MlpClassifier, Vec<f64>)> {
    let pos = samples.iter().filter(|s| s.1 == 1).count();
    if pos == 0 || pos == samples.len() {
        return Err(Error::SingleClass);
    }
    if cfg.epochs == 0 || !(cfg.lr > 0.0) || cfg.hidden == 0 {
        return Err(Error::InvalidArgument("epochs, lr and hidden must be positive".into()));
    }
    let dim = samples[0].0.dim();
    let w_pos = cfg.w_pos.unwrap_or((samples.len() - pos) as f64 / pos as f64);
    let mut rng = rng::seeded(cfg.seed);
    let mut model = MlpClassifier {
        grouper: GrouperModel::zeros(dim),
        head: MlpHead::init(dim, cfg.hidden, &mut rng),
    };
    let mut opt = Adam::new(cfg.lr).with_weight_decay(cfg.weight_decay);
    let n = samples.len() as f64;
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let parts: Vec<Result<(f64, MlpClassifier)>> = samples
            .par_iter()
            .map(|(stack, y)| {
                let mut g = model.zeros_like();
                let alpha = model.grouper.weights(stack)?;
                let f = weighted_sum(stack, &alpha);
                let cache = model.head.forward_cached(&f)?;
                let (loss, dz) = weighted_bce_logit(cache.logit, *y, w_pos);
                let df = model.head.backward(&cache, dz / n, &mut g.head);
                model.grouper.backward(stack, &alpha, &df, &mut g.grouper);
                Ok((loss / n, g))
            })
            .collect();
        let mut grads = model.zeros_like();
        let mut loss = 0.0;
        for part in parts {
            let (l, g) = part?;
            loss += l;
            grads.axpy(&g, 1.0);
        }
        if !loss.is_finite() || !grads.all_finite() {
            return Err(Error::Divergence(format!("mlp loss at epoch {epoch}")));
        }
        let lr = cfg.lr * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / cfg.epochs as f64).cos());
        opt.step_with_lr(&mut model, &grads, lr);
        losses.push(loss);
    }
    Ok((model, losses))
}

/// Random stack for tests and fuzz seeds.
pub fn random_stack<R: Rng>(patient: &str, plane: Plane, slices: usize, dim: usize, rng: &mut R) -> SliceFeatureStack {
    let vectors = (0..slices)
        .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    SliceFeatureStack {
        patient: patient.to_string(),
        plane,
        slice_indices: (0..slices).collect(),
        vectors,
    }
}
