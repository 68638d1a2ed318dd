use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learn::focal_loss_logit;
use crate::nn::{LrSchedule, Params, SeResNet, SeResNetConfig, Sgd, Tensor4};
use crate::rng;
use crate::volume::Volume;

/// Largest training set accepted by [`train_toy`].
pub const MAX_TOY_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyTrainConfig {
    pub max_epochs: usize,
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub momentum: f64,
    /// Focal-loss balance; `None` uses the positive-class inverse frequency
    /// `n_neg / n`.
    pub focal_alpha: Option<f64>,
    pub focal_gamma: f64,
    /// Training stops once the epoch loss falls below this value.
    pub target_loss: Option<f64>,
    pub seed: u64,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        ToyTrainConfig {
            max_epochs: 200,
            base_lr: 1e-3,
            warmup_epochs: 10,
            plateau_patience: 10,
            plateau_factor: 0.5,
            momentum: 0.9,
            focal_alpha: None,
            focal_gamma: 2.0,
            target_loss: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyReport {
    pub losses: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub alpha: f64,
}

impl ToyReport {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().unwrap_or(&f64::NAN)
    }
}

/// Positive-class inverse frequency.
pub fn inverse_frequency_alpha(labels: &[u8]) -> f64 {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    1.0 - pos as f64 / labels.len() as f64
}

/// Full-batch training of a (small) SE-ResNet with focal loss, momentum SGD,
/// linear warm-up and plateau reduction.
pub fn train_toy(
    cfg: &SeResNetConfig,
    samples: &[(Volume, u8)],
    tcfg: &ToyTrainConfig,
) -> Result<(SeResNet, ToyReport)> {
    if samples.is_empty() || samples.len() > MAX_TOY_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "toy training takes 1..={MAX_TOY_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if tcfg.max_epochs == 0 {
        return Err(Error::InvalidArgument("max_epochs must be >= 1".into()));
    }
    let mut rng = rng::seeded(tcfg.seed);
    let mut model = SeResNet::init(cfg, &mut rng)?;
    let inputs: Vec<Tensor4> = samples
        .iter()
        .map(|(v, _)| {
            model.check_geometry(v.dims())?;
            Tensor4::new(1, v.dims(), v.data().to_vec())
        })
        .collect::<Result<_>>()?;
    let labels: Vec<u8> = samples.iter().map(|(_, y)| *y).collect();
    let alpha = tcfg.focal_alpha.unwrap_or_else(|| inverse_frequency_alpha(&labels));
    let mut schedule = LrSchedule::new(
        tcfg.base_lr,
        tcfg.warmup_epochs,
        tcfg.plateau_patience,
        tcfg.plateau_factor,
    );
    let mut opt = Sgd::new(tcfg.momentum);
    let mut report = ToyReport {
        losses: Vec::new(),
        learning_rates: Vec::new(),
        alpha,
    };
    let n = samples.len() as f64;
    for epoch in 0..tcfg.max_epochs {
        let per_sample: Vec<(f64, SeResNet)> = inputs
            .par_iter()
            .zip(labels.par_iter())
            .map(|(x, &y)| {
                let (logit, cache) = model.forward_cached(x)?;
                let (loss, dlogit) = focal_loss_logit(logit, y, alpha, tcfg.focal_gamma);
                let mut g = model.zeros_like();
                model.backward(&cache, dlogit / n, &mut g);
                Ok((loss, g))
            })
            .collect::<Result<_>>()?;
        // fixed-order reduction
        let mut grads = model.zeros_like();
        let mut loss = 0.0;
        for (l, g) in &per_sample {
            loss += l / n;
            grads.axpy(g, 1.0);
        }
        if !loss.is_finite() || !grads.all_finite() {
            return Err(Error::Divergence(format!("toy SE-ResNet loss at epoch {epoch}")));
        }
        report.losses.push(loss);
        if tcfg.target_loss.is_some_and(|t| loss < t) {
            break;
        }
        let lr = schedule.lr(epoch);
        report.learning_rates.push(lr);
        opt.step(&mut model, &grads, lr);
        schedule.observe(epoch, loss);
    }
    Ok((model, report))
}
