use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{bootstrap_ci, metric_value, BootstrapConfig, Metric, PredictionSet, RocPoint, Task};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCi {
    pub est: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Five metrics with percentile intervals, plus the settings that produced
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub n: usize,
    pub n_positive: usize,
    pub threshold: f64,
    pub n_bootstrap: usize,
    pub level: f64,
    pub seed: u64,
    pub auc: MetricCi,
    pub sensitivity: MetricCi,
    pub specificity: MetricCi,
    pub f1: MetricCi,
    pub balanced_acc: MetricCi,
}

impl EvalReport {
    pub fn metric(&self, m: Metric) -> MetricCi {
        match m {
            Metric::Auc => self.auc,
            Metric::Sensitivity => self.sensitivity,
            Metric::Specificity => self.specificity,
            Metric::F1 => self.f1,
            Metric::BalancedAcc => self.balanced_acc,
        }
    }
}

pub fn evaluate_run(preds: &PredictionSet, cfg: &BootstrapConfig) -> Result<EvalReport> {
    let ci = |m: Metric| -> Result<MetricCi> {
        let est = metric_value(preds, m, cfg.threshold)?;
        let (lo, hi) = bootstrap_ci(preds, m, cfg)?;
        Ok(MetricCi { est, lo, hi })
    };
    Ok(EvalReport {
        task: preds.task,
        n: preds.len(),
        n_positive: preds.positives(),
        threshold: cfg.threshold,
        n_bootstrap: cfg.n_iter,
        level: cfg.level,
        seed: cfg.seed,
        auc: ci(Metric::Auc)?,
        sensitivity: ci(Metric::Sensitivity)?,
        specificity: ci(Metric::Specificity)?,
        f1: ci(Metric::F1)?,
        balanced_acc: ci(Metric::BalancedAcc)?,
    })
}

pub const CSV_HEADER: &str =
    "model,AUC (95% CI),Sensitivity (95% CI),Specificity (95% CI),F1 (95% CI),Balanced_acc (95% CI)";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Table-style CSV: one row per labelled report, cells `est (lo, hi)`.
pub fn metrics_csv(rows: &[(String, EvalReport)]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (label, r) in rows {
        out.push_str(&csv_field(label));
        for m in Metric::ALL {
            let c = r.metric(m);
            out.push(',');
            out.push_str(&csv_field(&format!("{:.2} ({:.2}, {:.2})", c.est, c.lo, c.hi)));
        }
        out.push('\n');
    }
    out
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold);
    }
    out
}

/// Minimal SVG plot of one or more ROC curves with the chance diagonal.
pub fn roc_svg(curves: &[(String, Vec<RocPoint>)]) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let map = |fpr: f64, tpr: f64| (PAD + fpr * SIZE, PAD + (1.0 - tpr) * SIZE);
    let total = SIZE + 2.0 * PAD;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total}\" height=\"{total}\" viewBox=\"0 0 {total} {total}\">\n"
    );
    let _ = writeln!(
        out,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"none\" stroke=\"black\"/>"
    );
    let (x0, y0) = map(0.0, 0.0);
    let (x1, y1) = map(1.0, 1.0);
    let _ = writeln!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>"
    );
    for (i, (label, pts)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = map(p.fpr, p.tpr);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            path.join(" ")
        );
        let escaped = label.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{escaped}</text>",
            PAD + SIZE * 0.55,
            PAD + SIZE * 0.75 + 16.0 * i as f64
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">FPR</text>",
        PAD + SIZE / 2.0,
        total - 10.0
    );
    let _ = writeln!(
        out,
        "<text x=\"5\" y=\"{}\" font-size=\"12\">TPR</text>",
        PAD + SIZE / 2.0
    );
    out.push_str("</svg>\n");
    out
}
