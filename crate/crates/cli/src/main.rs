use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fstg_cli::run_command;

#[derive(Parser)]
#[command(name = "fstg", version, about = "Rectal MRI classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort with NIfTI volumes and a manifest.
    PhantomGen(Common),
    /// Crop and normalize every view into fixed-size patches.
    Preprocess(Common),
    /// Train the per-view frequency harmonizers.
    HarmonizeTrain(Common),
    /// Harmonize every patch with the trained models.
    HarmonizeApply(Common),
    /// Compute slice features for raw (and harmonized) patches.
    Featurize(Common),
    /// Fit the configured classifier.
    Train(Common),
    /// Score the test split and write the report.
    Evaluate(Common),
    /// Fit and evaluate the configured grid.
    Table(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("FSTG_THREADS") {
        let n = match v.parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                eprintln!("error: FSTG_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        };
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let (name, common) = match cli.command {
        Command::PhantomGen(c) => ("phantom-gen", c),
        Command::Preprocess(c) => ("preprocess", c),
        Command::HarmonizeTrain(c) => ("harmonize-train", c),
        Command::HarmonizeApply(c) => ("harmonize-apply", c),
        Command::Featurize(c) => ("featurize", c),
        Command::Train(c) => ("train", c),
        Command::Evaluate(c) => ("evaluate", c),
        Command::Table(c) => ("table", c),
    };
    match run_command(name, &common.config, common.seed, common.out) {
        Ok(m) => {
            println!("{name}: wrote {} files", m.outputs.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
