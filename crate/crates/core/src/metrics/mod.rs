//! Binary classification metrics, rank-based AUC and stratified bootstrap
//! confidence intervals.

mod report;

pub use report::{evaluate_run, metrics_csv, roc_csv, roc_svg, EvalReport, MetricCi, CSV_HEADER};

use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats::percentile_sorted;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Evi,
    Mfi,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Evi => "evi",
            Task::Mfi => "mfi",
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "evi" => Ok(Task::Evi),
            "mfi" => Ok(Task::Mfi),
            _ => Err(Error::InvalidArgument(format!("unknown task '{s}'"))),
        }
    }
}

/// Per-case labels and scores for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub task: Task,
    pub labels: Vec<u8>,
    pub scores: Vec<f64>,
}

impl PredictionSet {
    pub fn new(task: Task, labels: Vec<u8>, scores: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("empty prediction set".into()));
        }
        if labels.len() != scores.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} scores",
                labels.len(),
                scores.len()
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(PredictionSet { task, labels, scores })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// Scores at or above `threshold` are predicted positive.
pub fn confusion(preds: &PredictionSet, threshold: f64) -> Confusion {
    confusion_of(&preds.labels, &preds.scores, threshold)
}

fn confusion_of(labels: &[u8], scores: &[f64], threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for (&y, &s) in labels.iter().zip(scores) {
        match (y == 1, s >= threshold) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

pub fn sensitivity(tp: usize, fn_: usize) -> Result<f64> {
    if tp + fn_ == 0 {
        return Err(Error::UndefinedMetric("sensitivity without positives"));
    }
    Ok(tp as f64 / (tp + fn_) as f64)
}

pub fn specificity(tn: usize, fp: usize) -> Result<f64> {
    if tn + fp == 0 {
        return Err(Error::UndefinedMetric("specificity without negatives"));
    }
    Ok(tn as f64 / (tn + fp) as f64)
}

pub fn balanced_accuracy(sens: f64, spec: f64) -> f64 {
    (sens + spec) / 2.0
}

pub fn f1(tp: usize, fp: usize, fn_: usize) -> Result<f64> {
    if tp + fp + fn_ == 0 {
        return Err(Error::UndefinedMetric("f1 with an empty confusion table"));
    }
    Ok(tp as f64 / (tp as f64 + 0.5 * (fp + fn_) as f64))
}

/// Mann-Whitney AUC from midranks; ties between classes count one half.
pub fn roc_auc(preds: &PredictionSet) -> Result<f64> {
    auc_of(&preds.labels, &preds.scores)
}

fn auc_of(labels: &[u8], scores: &[f64]) -> Result<f64> {
    let n = labels.len();
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum of positives; a tie block over ranks i+1..=j has
    // doubled midrank i+1+j
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let in_block = order[i..j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        twice_rank_sum += in_block * (i as u128 + 1 + j as u128);
        i = j;
    }
    let (p, q) = (pos as u128, neg as u128);
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok((twice_u as f64 / 2.0) / (p * q) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Auc,
    Sensitivity,
    Specificity,
    F1,
    BalancedAcc,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Auc,
        Metric::Sensitivity,
        Metric::Specificity,
        Metric::F1,
        Metric::BalancedAcc,
    ];
}

fn metric_of(labels: &[u8], scores: &[f64], metric: Metric, threshold: f64) -> Result<f64> {
    if metric == Metric::Auc {
        return auc_of(labels, scores);
    }
    let c = confusion_of(labels, scores, threshold);
    match metric {
        Metric::Sensitivity => sensitivity(c.tp, c.fn_),
        Metric::Specificity => specificity(c.tn, c.fp),
        Metric::F1 => f1(c.tp, c.fp, c.fn_),
        Metric::BalancedAcc => Ok(balanced_accuracy(sensitivity(c.tp, c.fn_)?, specificity(c.tn, c.fp)?)),
        Metric::Auc => unreachable!(),
    }
}

pub fn metric_value(preds: &PredictionSet, metric: Metric, threshold: f64) -> Result<f64> {
    metric_of(&preds.labels, &preds.scores, metric, threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_iter: usize,
    pub level: f64,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_iter: 1000,
            level: 0.95,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Bootstrap distribution of `metric` under class-stratified resampling.
/// Iteration `i` draws from its own stream of the master seed, so the result
/// does not depend on scheduling.
pub fn bootstrap_samples(preds: &PredictionSet, metric: Metric, cfg: &BootstrapConfig) -> Result<Vec<f64>> {
    metric_value(preds, metric, cfg.threshold)?;
    let pos: Vec<usize> = (0..preds.len()).filter(|&i| preds.labels[i] == 1).collect();
    let neg: Vec<usize> = (0..preds.len()).filter(|&i| preds.labels[i] == 0).collect();
    (0..cfg.n_iter)
        .into_par_iter()
        .map(|it| {
            let mut r = rng::stream(cfg.seed, it as u64);
            let mut labels = Vec::with_capacity(preds.len());
            let mut scores = Vec::with_capacity(preds.len());
            for class in [&pos, &neg] {
                for _ in 0..class.len() {
                    let k = class[r.random_range(0..class.len())];
                    labels.push(preds.labels[k]);
                    scores.push(preds.scores[k]);
                }
            }
            metric_of(&labels, &scores, metric, cfg.threshold)
        })
        .collect()
}

/// Percentile interval at `((1-level)/2, (1+level)/2)`.
pub fn bootstrap_ci(preds: &PredictionSet, metric: Metric, cfg: &BootstrapConfig) -> Result<(f64, f64)> {
    if cfg.n_iter == 0 || !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::InvalidArgument(
            "bootstrap needs n_iter >= 1 and level in (0, 1)".into(),
        ));
    }
    let mut s = bootstrap_samples(preds, metric, cfg)?;
    s.sort_by(f64::total_cmp);
    let tail = (1.0 - cfg.level) / 2.0 * 100.0;
    Ok((percentile_sorted(&s, tail), percentile_sorted(&s, 100.0 - tail)))
}

/// One ROC operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// ROC points for every distinct score used as a threshold, starting at
/// `(0, 0)` with an infinite threshold.
pub fn roc_curve(preds: &PredictionSet) -> Result<Vec<RocPoint>> {
    let pos = preds.positives();
    let neg = preds.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds.scores[b].total_cmp(&preds.scores[a]));
    let mut out = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = preds.scores[order[i]];
        while i < order.len() && preds.scores[order[i]] == t {
            if preds.labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: t,
        });
    }
    Ok(out)
}
