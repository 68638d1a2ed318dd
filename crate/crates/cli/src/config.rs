use std::path::{Path, PathBuf};

use fstg_core::augment::AugmentConfig;
use fstg_core::features::MlpTrainConfig;
use fstg_core::freq::{PerturbationConfig, TrainConfig};
use fstg_core::metrics::Task;
use fstg_core::nn::ToyTrainConfig;
use fstg_core::phantom::PhantomSpec;
use fstg_core::preprocess::NormalizeOrder;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    UmedptLr,
    MlpHead,
    SeresnetToy,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::UmedptLr => "umedpt_lr",
            ModelKind::MlpHead => "mlp_head",
            ModelKind::SeresnetToy => "seresnet_toy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    Axial,
    Sagittal,
    Fused,
}

impl Fusion {
    pub fn as_str(self) -> &'static str {
        match self {
            Fusion::Axial => "axial",
            Fusion::Sagittal => "sagittal",
            Fusion::Fused => "fused",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub axial_patch: [usize; 3],
    pub sagittal_patch: [usize; 3],
    pub clip_lo: f64,
    pub clip_hi: f64,
    pub order: NormalizeOrder,
    /// Resample to this spacing before cropping; `null` keeps the native grid.
    pub target_spacing: Option<[f64; 3]>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            axial_patch: [48, 48, 16],
            sagittal_patch: [48, 16, 48],
            clip_lo: 2.5,
            clip_hi: 97.5,
            order: NormalizeOrder::AfterCrop,
            target_spacing: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarmonizeConfig {
    pub perturbation: PerturbationConfig,
    pub train: TrainConfig,
    /// Training-split cases forming the reference corpus.
    pub reference_cases: usize,
    /// Central slices taken from each reference patch and view.
    pub slices_per_case: usize,
}

impl Default for HarmonizeConfig {
    fn default() -> Self {
        HarmonizeConfig {
            perturbation: PerturbationConfig::default(),
            train: TrainConfig::default(),
            reference_cases: 10,
            slices_per_case: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct FeatureConfig {
    pub encoder_seed: u64,
    /// Externally extracted feature file used instead of the toy encoder.
    pub external_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeresnetConfig {
    /// Crop taken from the preprocessed patch; must divide by the stride plan.
    pub patch: [usize; 3],
    pub train: ToyTrainConfig,
    pub augment: Option<AugmentConfig>,
}

impl Default for SeresnetConfig {
    fn default() -> Self {
        SeresnetConfig {
            patch: [32, 32, 8],
            train: ToyTrainConfig {
                max_epochs: 20,
                ..ToyTrainConfig::default()
            },
            augment: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub seed: u64,
    pub threshold: f64,
    pub n_bootstrap: usize,
    pub level: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            seed: 0,
            threshold: 0.5,
            n_bootstrap: 1000,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableConfig {
    pub views: Vec<Fusion>,
    pub harmonized: Vec<bool>,
    pub models: Vec<ModelKind>,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            views: vec![Fusion::Axial, Fusion::Sagittal, Fusion::Fused],
            harmonized: vec![false, true],
            models: vec![ModelKind::UmedptLr],
        }
    }
}

/// Declarative description of one experiment. Every field has a default so
/// a config may list only what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Dataset manifest; defaults to the phantom manifest under the output
    /// directory.
    pub dataset_manifest: Option<PathBuf>,
    pub phantom: PhantomSpec,
    pub split: [f64; 2],
    pub preprocess: PreprocessConfig,
    pub harmonize: HarmonizeConfig,
    pub features: FeatureConfig,
    pub model: ModelKind,
    pub fusion: Fusion,
    pub harmonized: bool,
    pub task: Task,
    pub pca_variance: f64,
    pub lr_lambda: f64,
    pub mlp: MlpTrainConfig,
    pub seresnet: SeresnetConfig,
    pub metrics: MetricConfig,
    pub table: TableConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: PathBuf::from("fstg-out"),
            dataset_manifest: None,
            phantom: PhantomSpec::default(),
            split: [0.2, 0.2],
            preprocess: PreprocessConfig::default(),
            harmonize: HarmonizeConfig::default(),
            features: FeatureConfig::default(),
            model: ModelKind::UmedptLr,
            fusion: Fusion::Fused,
            harmonized: false,
            task: Task::Evi,
            pca_variance: 0.95,
            lr_lambda: 1.0,
            mlp: MlpTrainConfig::default(),
            seresnet: SeresnetConfig::default(),
            metrics: MetricConfig::default(),
            table: TableConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|_| CliError::MissingInput(path.to_path_buf()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.split.iter().any(|f| !(0.0..1.0).contains(f)) {
            return bad("split fractions must lie in [0, 1)");
        }
        let p = &self.preprocess;
        if !(0.0 <= p.clip_lo && p.clip_lo < p.clip_hi && p.clip_hi <= 100.0) {
            return bad("clip percentiles must satisfy 0 <= lo < hi <= 100");
        }
        if p.axial_patch.contains(&0) || p.sagittal_patch.contains(&0) || self.seresnet.patch.contains(&0) {
            return bad("patch sizes must be positive");
        }
        if let Some(t) = p.target_spacing {
            if t.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return bad("target spacing must be positive");
            }
        }
        if !(self.pca_variance > 0.0 && self.pca_variance <= 1.0) {
            return bad("pca_variance must lie in (0, 1]");
        }
        if !(self.lr_lambda >= 0.0 && self.lr_lambda.is_finite()) {
            return bad("lr_lambda must be >= 0");
        }
        let m = &self.metrics;
        if m.n_bootstrap == 0 || !(m.level > 0.0 && m.level < 1.0) || !m.threshold.is_finite() {
            return bad("metrics need n_bootstrap >= 1, level in (0, 1) and a finite threshold");
        }
        if self.harmonize.reference_cases == 0 || self.harmonize.slices_per_case == 0 {
            return bad("harmonizer reference corpus must be non-empty");
        }
        if self.harmonize.train.epochs == 0 {
            return bad("harmonizer epochs must be >= 1");
        }
        self.harmonize
            .perturbation
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.phantom.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(a) = &self.seresnet.augment {
            a.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if self.table.views.is_empty() || self.table.harmonized.is_empty() || self.table.models.is_empty() {
            return bad("table grid axes must be non-empty");
        }
        Ok(())
    }

    /// Canonical JSON of the resolved config (defaults filled in).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_all_defaults() {
        assert_eq!(ExperimentConfig::parse("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_enums() {
        assert!(matches!(
            ExperimentConfig::parse("{\"sed\": 1}"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("{\"model\": \"resnet50\"}"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("{\"pca_variance\": 0}"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn roundtrips_through_json() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&c.canonical_json()).unwrap(), c);
    }
}
