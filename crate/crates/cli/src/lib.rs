//! `palmjog` command-line tool: synthetic data, training, evaluation,
//! compression, headless scenarios, the socket service and benchmarks.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.

pub mod bench;
mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod scenario;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{load_classifier, load_model, LoadedModel};
pub use error::{Failure, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION};

#[derive(Debug, Parser)]
#[command(name = "palmjog", version, about = "Gesture teleoperation toolkit")]
pub struct Cli {
    /// Seed for data generation, splits and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file overriding defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Only print errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic landmark dataset (CSV).
    GenData(GenDataArgs),
    /// Train the classifier on a dataset.
    Train(TrainArgs),
    /// Accuracy and confusion matrix of a float or quantized model.
    Eval(EvalArgs),
    /// Prune (optional) and quantize a float model to int8.
    Quantize(QuantizeArgs),
    /// Float versus quantized agreement on a dataset.
    Agree(AgreeArgs),
    /// Run a scripted scenario headless on a virtual clock.
    Sim(SimArgs),
    /// Serve the NDJSON socket protocol.
    Serve(ServeArgs),
    /// Measure classification and pipeline latency at a fixed frame rate.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Layer widths, e.g. 42,20,10,8.
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub val_per_class: Option<usize>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    #[arg(short, long)]
    pub input: PathBuf,
    /// Evaluate every row instead of the held-out split.
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub val_per_class: Option<usize>,
    /// Write the report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Calibration dataset; its training split sets activation ranges.
    #[arg(long)]
    pub calib: PathBuf,
    /// Magnitude-prune to this sparsity first.
    #[arg(long)]
    pub prune: Option<f64>,
    #[arg(long)]
    pub val_per_class: Option<usize>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AgreeArgs {
    /// Float model.
    #[arg(short, long)]
    pub model: PathBuf,
    /// Quantized model.
    #[arg(long)]
    pub quantized: PathBuf,
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub val_per_class: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Scenario script (JSON).
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    pub script: Option<PathBuf>,
    /// Bundled script: pick-and-place or limit-seek.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Classifier for frame input (float or quantized file).
    #[arg(short, long)]
    pub model: Option<PathBuf>,
    /// Feed gestures directly instead of classified frames.
    #[arg(long)]
    pub hold: bool,
    /// Trajectory log (NDJSON); the verdict goes beside it.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(short, long)]
    pub model: PathBuf,
    /// Stop after this many seconds instead of waiting for Ctrl-C.
    #[arg(long)]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    #[arg(long)]
    pub fps: Option<u32>,
    #[arg(long)]
    pub seconds: Option<f64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_VALIDATION,
            };
        }
    };
    let argv = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::dispatch(cli, argv) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
