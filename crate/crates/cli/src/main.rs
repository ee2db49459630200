//! `pnp-retinex` command-line tool.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "pnp-retinex",
    version,
    about = "Low-light enhancement by sequential Retinex decomposition"
)]
struct Cli {
    /// Worker threads for batch work (default: logical CPU count).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enhance one or more images.
    Enhance(EnhanceArgs),
    /// Write the illumination and reflectance layers.
    Decompose(DecomposeArgs),
    /// Generate paired low-light / ground-truth images.
    Synth(SynthArgs),
    /// Score images against ground truth (PSNR, SSIM, MSE).
    Eval(EvalArgs),
    /// Sweep one parameter over paired images.
    Ablate(AblateArgs),
    /// Pixel-masking influence analysis of the reflectance iterations.
    Probe(ProbeArgs),
}

/// Configuration sources, applied in order: defaults, `--config`,
/// `--profile`, `--denoiser`, named flags, then each `--set`.
#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// JSON config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Gamma preset: set12 or lol.
    #[arg(long)]
    profile: Option<String>,
    /// Denoiser kind: identity, wavelet_shrinkage, total_variation, external.
    #[arg(long)]
    denoiser: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    /// Denoiser noise level in [0, 1] units; `a/b` fractions are accepted.
    #[arg(long, value_name = "LEVEL")]
    noise_level: Option<String>,
    /// Override any config key, e.g. `--set mu=0.01 --set denoiser.levels=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    /// Input images or directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output file (single input) or directory.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Also write the illumination layer.
    #[arg(long)]
    emit_l: bool,
    /// Also write the reflectance layer (clamped to [0, 1]).
    #[arg(long)]
    emit_r: bool,
    /// Write per-iteration solver traces as CSV.
    #[arg(long)]
    trace: bool,
    /// Manifest path (default: next to the output).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Clean source images or directories.
    inputs: Vec<PathBuf>,
    /// Output directory for `<name>_low.png` / `<name>_gt.png`.
    #[arg(short, long)]
    output: PathBuf,
    /// Use this many procedural scenes instead of input files.
    #[arg(long)]
    scenes: Option<usize>,
    /// Side length of procedural scenes.
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Multiplier on the HSV value channel.
    #[arg(long, default_value_t = 0.2)]
    darken: f64,
    /// Gaussian noise standard deviation in 8-bit units.
    #[arg(long, default_value_t = 5.0)]
    noise_sigma: f64,
    /// Base seed; image `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of images to score.
    results: PathBuf,
    /// Directory of ground-truth images.
    ground_truth: PathBuf,
    /// Output prefix; writes `<prefix>.csv` and `<prefix>.json`.
    #[arg(short, long, default_value = "metrics")]
    output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Directory of low-light inputs.
    inputs: PathBuf,
    /// Ground-truth directory (default: the input directory).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Config key to sweep.
    #[arg(long)]
    param: String,
    /// Comma-separated values; `a/b` fractions are accepted.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// CSV output path.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    input: PathBuf,
    /// JSON graph output.
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the graph in DOT format.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Write one heat map of the change per probe into this directory.
    #[arg(long)]
    heatmaps: Option<PathBuf>,
    /// Probe pixel as `row,col`; repeatable. Overrides `--grid`.
    #[arg(long = "probe", value_name = "ROW,COL")]
    probes: Vec<String>,
    /// Evenly spaced probe grid `ROWSxCOLS`.
    #[arg(long, default_value = "2x5")]
    grid: String,
    /// Comma-separated reflectance iterations to probe.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    iterations: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long, default_value_t = 1e-4)]
    min_magnitude: f64,
    /// Drop edges from a probe to itself.
    #[arg(long)]
    exclude_self: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let result = commands::with_pool(cli.workers, || match cli.command {
        Command::Enhance(a) => commands::enhance(a, &argv),
        Command::Decompose(a) => commands::decompose(a, &argv),
        Command::Synth(a) => commands::synth(a, &argv),
        Command::Eval(a) => commands::eval(a, &argv),
        Command::Ablate(a) => commands::ablate(a, &argv),
        Command::Probe(a) => commands::probe(a, &argv),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
