//! `dyntomo`: simulate, corrupt, reconstruct, train, denoise, refine and evaluate
//! dynamic density series from the command line.
//!
//! Exit status is 0 on success, 1 when the input or configuration is invalid
//! and 2 when a stage fails at run time.

mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use dyntomo::Error;

#[derive(Debug, Parser)]
#[command(name = "dyntomo", version, about = "Dynamic radiographic density reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate clean surrogate density series.
    Simulate(SimulateArgs),
    /// Forward-project series and add scatter and noise.
    Corrupt(CorruptArgs),
    /// Baseline inverse-Abel reconstruction of radiographs.
    Reconstruct(ReconstructArgs),
    /// Train a denoiser (supervised-only or WGAN-Sup).
    Train(TrainArgs),
    /// Apply a trained denoiser.
    Denoise(DenoiseArgs),
    /// Mass + TV refinement of density series.
    Refine(RefineArgs),
    /// Run an experiment manifest and write metric CSVs.
    Evaluate(EvaluateArgs),
    /// Run a manifest over a grid of scatter scales and noise levels.
    Sweep(SweepArgs),
    /// Write profile, box-plot and graymap data for a manifest.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Dataset JSON (defaults apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Index of the first series in the dataset stream.
    #[arg(long, default_value_t = 0)]
    first: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CorruptArgs {
    /// Series files or directories of them.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Beam JSON.
    #[arg(long)]
    beam: Option<PathBuf>,
    /// Scatter JSON.
    #[arg(long)]
    scatter: Option<PathBuf>,
    /// Series `i` (trailing number of its file name, else its position) uses `seed + i`.
    #[arg(long, default_value_t = 1000)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    /// Radiograph files (`*.rad.dwt`) or directories of them.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, default_value_t = dyntomo::forward::DEFAULT_CLAMP_EPS)]
    clamp_eps: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training JSON (defaults apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train_clean: PathBuf,
    #[arg(long)]
    train_noisy: PathBuf,
    #[arg(long)]
    val_clean: PathBuf,
    #[arg(long)]
    val_noisy: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RefineArgs {
    /// Series to refine.
    #[arg(long, required = true, num_args = 1..)]
    anchor: Vec<PathBuf>,
    /// Clean series (file or directory, matched by file name) giving the target masses.
    #[arg(long)]
    clean: PathBuf,
    /// Starting points, matched by file name (default: the anchors).
    #[arg(long)]
    init: Option<PathBuf>,
    /// Start from the classical denoiser settings.
    #[arg(long)]
    classical: bool,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rmsprop_decay: Option<f64>,
    #[arg(long)]
    rmsprop_eps: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Overrides `corrupt_seed` in the manifest.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    sweep: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stage { .. } => 2,
        e if e.is_validation() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Corrupt(a) => commands::corrupt(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Train(a) => commands::train(a),
        Command::Denoise(a) => commands::denoise(a),
        Command::Refine(a) => commands::refine(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Plot(a) => commands::plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
