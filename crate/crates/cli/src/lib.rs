//! Experiment driver: configuration, run manifests and the pipeline commands.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod run;

use std::path::{Path, PathBuf};

use config::ExperimentConfig;
use error::CliResult;
use run::{Run, RunManifest};

/// Pipeline stages in execution order.
pub const COMMANDS: [&str; 8] = [
    "phantom-gen",
    "preprocess",
    "harmonize-train",
    "harmonize-apply",
    "featurize",
    "train",
    "evaluate",
    "table",
];

/// Loads the config, runs one command and writes its manifest.
pub fn run_command(command: &str, config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> CliResult<RunManifest> {
    let cfg = ExperimentConfig::load(config)?;
    cfg.validate()?;
    let name = COMMANDS
        .iter()
        .copied()
        .find(|c| *c == command)
        .ok_or_else(|| error::CliError::Config(format!("unknown command {command}")))?;
    let mut run = Run::new(name, cfg, seed, out);
    match name {
        "phantom-gen" => commands::phantom_gen(&mut run)?,
        "preprocess" => commands::preprocess(&mut run)?,
        "harmonize-train" => commands::harmonize_train(&mut run)?,
        "harmonize-apply" => commands::harmonize_apply(&mut run)?,
        "featurize" => commands::featurize(&mut run)?,
        "train" => commands::train(&mut run)?,
        "evaluate" => commands::evaluate(&mut run)?,
        _ => commands::table(&mut run)?,
    }
    run.finish()
}
