//! `beanscope` command-line interface.
//!
//! Subcommands compose through files only: `gen` writes snapshots and a
//! manifest, `extract` turns the manifest into a feature table, `train`
//! fits a model file, and `eval`/`classify`/`sweep`/`sites`/`plot` consume
//! those artifacts. Every subcommand is reproducible: identical flags and
//! seeds give byte-identical outputs.

mod commands;

use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(
    name = "beanscope",
    version,
    about = "Green coffee bean grading pipeline",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a seeded synthetic dataset (snapshots + manifest.csv).
    Gen(GenArgs),
    /// Segment snapshot images into bean crops and a region table.
    Segment(SegmentArgs),
    /// Extract per-bean features from a dataset manifest.
    Extract(ExtractArgs),
    /// Train the binary qualified/defective model on a feature table.
    Train(TrainArgs),
    /// Apply a model to a feature table, one verdict per bean.
    Classify(ClassifyArgs),
    /// Evaluate a model on the held-out side of a deterministic split.
    Eval(EvalArgs),
    /// Accuracy across a grid of training ratios.
    Sweep(SweepArgs),
    /// Train and evaluate the one-vs-one site discriminator.
    Sites(SitesArgs),
    /// Render a figure (SVG) from a pipeline CSV.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Comma-separated site profiles: built-in names (default1..default4)
    /// or paths to profile JSON files.
    #[arg(long, default_value = "default1")]
    pub site_profile: String,
    /// Optional defect profile JSON; the built-in profile otherwise.
    #[arg(long)]
    pub defect_profile: Option<PathBuf>,
    /// Qualified beans per site.
    #[arg(long, default_value_t = 300)]
    pub qualified: usize,
    /// Defective beans per site.
    #[arg(long, default_value_t = 300)]
    pub defective: usize,
    /// Snapshot grid, e.g. 8x8.
    #[arg(long, default_value = "8x8")]
    pub grid: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for snapshots and manifest.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the resolved profiles as JSON.
    #[arg(long)]
    pub emit_profiles: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    /// Snapshot images (PPM P6).
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
    #[arg(long, default_value_t = 163)]
    pub threshold: u8,
    #[arg(long, default_value_t = 200)]
    pub min_pixels: usize,
    #[arg(long, default_value_t = 20000)]
    pub max_pixels: usize,
    /// 4 or 8.
    #[arg(long, default_value_t = 8)]
    pub connectivity: u8,
    /// Directory for bean crops and regions.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// Dataset manifest (from `gen` or hand-written).
    #[arg(long)]
    pub manifest: PathBuf,
    /// two-r | two-g | two-b | six | hist768.
    #[arg(long)]
    pub scheme: String,
    /// Segmentation threshold used to mask bean pixels inside each box.
    #[arg(long, default_value_t = 163)]
    pub threshold: u8,
    /// Output feature CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every bean's three distribution curves.
    #[arg(long)]
    pub histograms_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub scheme: String,
    /// Training fraction of the whole set.
    #[arg(long, default_value_t = 0.4)]
    pub ratio: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Output verdict CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Split ratio; defaults to the model's training ratio context via its
    /// embedded seed, so eval reproduces the training split.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Evaluate on the full feature table instead of the split's test side.
    #[arg(long, default_value_t = false)]
    pub all: bool,
    /// Output report CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub scheme: String,
    /// Grid as start:end:step, e.g. 0.05:0.95:0.05.
    #[arg(long, default_value = "0.05:0.95:0.05")]
    pub ratios: String,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output sweep CSV (one row per ratio).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-repeat report CSV.
    #[arg(long)]
    pub detail: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SitesArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    pub ratio: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Site discrimination uses qualified beans; set this to keep
    /// defective rows too.
    #[arg(long, default_value_t = false)]
    pub include_defective: bool,
    /// Output confusion-matrix CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional multiclass model JSON.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// scatter | curves | sweep | confusion.
    #[arg(long)]
    pub kind: String,
    /// Input CSV (features, histograms, sweep, or confusion table).
    #[arg(long, value_name = "CSV")]
    pub r#in: PathBuf,
    /// Model JSON supplying the separatrix line (scatter only).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Restrict curves to one channel (curves only).
    #[arg(long)]
    pub channel: Option<String>,
    /// Output SVG.
    #[arg(long)]
    pub out: PathBuf,
}

/// Resolve the working seed: flag, then BEANSCOPE_SEED, then the default.
pub fn resolve_seed(flag: Option<u64>, env_seed: Option<u64>) -> u64 {
    flag.or(env_seed).unwrap_or(DEFAULT_SEED)
}

/// Parse argv and run. Expected failures print one diagnostic line to the
/// error stream and return 1; clap help/version return 0.
pub fn run_with_io(
    args: &[String],
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    env_seed: Option<u64>,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    return 0;
                }
                _ => 1,
            };
            let _ = write!(stderr, "{e}");
            return code;
        }
    };
    match commands::dispatch(cli.command, stdout, env_seed) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}
