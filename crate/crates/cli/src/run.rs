use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fstg_core::rng::mix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Effective seeds of every stochastic stage, derived from the master seed
/// and the stage's own configured seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub phantom: u64,
    pub split: u64,
    pub perturbation: u64,
    pub harmonizer: u64,
    pub encoder: u64,
    pub mlp: u64,
    pub seresnet: u64,
    pub augment: u64,
    pub bootstrap: u64,
}

impl Seeds {
    pub fn derive(master: u64, cfg: &ExperimentConfig) -> Self {
        let s = |tag: u64, own: u64| mix(mix(master, tag), own);
        Seeds {
            phantom: s(1, cfg.phantom.seed),
            split: s(2, 0),
            perturbation: s(3, cfg.harmonize.perturbation.rng_seed),
            harmonizer: s(4, cfg.harmonize.train.seed),
            encoder: s(5, cfg.features.encoder_seed),
            mlp: s(6, cfg.mlp.seed),
            seresnet: s(7, cfg.seresnet.train.seed),
            augment: s(8, 0),
            bootstrap: s(9, cfg.metrics.seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub seeds: Seeds,
    pub versions: BTreeMap<String, String>,
    pub defaults: BTreeMap<String, serde_json::Value>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Fixed choices not exposed in the config.
pub fn design_defaults() -> BTreeMap<String, serde_json::Value> {
    use serde_json::json;
    let mut d = BTreeMap::new();
    d.insert("leaky_relu_slope".into(), json!(fstg_core::nn::LEAKY_SLOPE));
    d.insert("zscore_epsilon".into(), json!(fstg_core::preprocess::ZSCORE_EPS));
    d.insert("instance_norm_epsilon".into(), json!(fstg_core::nn::InstanceNorm::EPS));
    d.insert(
        "frequency_radius".into(),
        json!("normalized so the spectrum corners sit at 1"),
    );
    d.insert(
        "harmonizer_widths".into(),
        json!(fstg_core::freq::HarmonizerModel::WIDTHS),
    );
    d.insert(
        "grouper".into(),
        json!("frozen_uniform for umedpt_lr, learned softmax for mlp_head"),
    );
    d.insert("fusion_order".into(), json!("axial_first"));
    d.insert("feature_dim".into(), json!(fstg_core::features::FEATURE_DIM));
    d.insert("bootstrap".into(), json!("class-stratified, percentile interval"));
    d.insert("positive_rule".into(), json!("score >= threshold"));
    d.insert("seresnet".into(), json!(fstg_core::nn::SeResNetConfig::toy()));
    d.insert("site_table".into(), json!(fstg_core::phantom::SITE_TABLE));
    d
}

pub fn versions() -> BTreeMap<String, String> {
    let mut v = BTreeMap::new();
    v.insert("fstg".into(), env!("CARGO_PKG_VERSION").into());
    v.insert("harmonizer_format".into(), fstg_core::nn::persist::VERSION.to_string());
    v.insert("seresnet_format".into(), fstg_core::nn::persist::VERSION.to_string());
    v.insert("feature_format".into(), "v1".into());
    v.insert("manifest_format".into(), "1".into());
    v
}

/// State of one command invocation: resolved config, output root and the
/// files read and written.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub seeds: Seeds,
    command: &'static str,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Run {
    pub fn new(command: &'static str, cfg: ExperimentConfig, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        let seed = seed.unwrap_or(cfg.seed);
        let out = out.unwrap_or_else(|| cfg.output_dir.clone());
        let mut cfg = cfg;
        cfg.seed = seed;
        cfg.output_dir = out.clone();
        let seeds = Seeds::derive(seed, &cfg);
        Run {
            cfg,
            out,
            seed,
            seeds,
            command,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn label(&self, p: &Path) -> String {
        p.strip_prefix(&self.out)
            .unwrap_or(p)
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/")
    }

    /// Reads a file; absence is a missing-input error.
    pub fn read(&self, p: &Path) -> CliResult<Vec<u8>> {
        std::fs::read(p).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::MissingInput(p.to_path_buf())
            } else {
                CliError::io(p, e)
            }
        })
    }

    pub fn note_input(&mut self, p: &Path, bytes: &[u8]) {
        let label = self.label(p);
        self.inputs.insert(label, sha256_hex(bytes));
    }

    pub fn read_noted(&mut self, p: &Path) -> CliResult<Vec<u8>> {
        let bytes = self.read(p)?;
        self.note_input(p, &bytes);
        Ok(bytes)
    }

    pub fn require(&self, p: &Path) -> CliResult<()> {
        if p.exists() {
            Ok(())
        } else {
            Err(CliError::MissingInput(p.to_path_buf()))
        }
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        std::fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        self.outputs.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    pub fn manifest(&self) -> RunManifest {
        let digest = |m: &BTreeMap<String, String>| {
            m.iter()
                .map(|(path, sha256)| FileDigest {
                    path: path.clone(),
                    sha256: sha256.clone(),
                })
                .collect()
        };
        let mut config = self.cfg.clone();
        // the output root is a location, not an experimental setting
        config.output_dir = PathBuf::from(".");
        RunManifest {
            command: self.command.to_string(),
            config_sha256: sha256_hex(config.canonical_json().as_bytes()),
            seed: self.seed,
            seeds: self.seeds,
            versions: versions(),
            defaults: design_defaults(),
            config: serde_json::to_value(&config).expect("serializable"),
            inputs: digest(&self.inputs),
            outputs: digest(&self.outputs),
        }
    }

    pub fn finish(mut self) -> CliResult<RunManifest> {
        let manifest = self.manifest();
        self.write_json(&format!("manifests/{}.json", self.command), &manifest)?;
        Ok(manifest)
    }
}
