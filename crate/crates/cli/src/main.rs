//! `crosspers` batch command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] crosspers::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        source: crosspers::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("self-test failed: {0}")]
    SelfTest(String),
}

#[derive(Debug, Parser)]
#[command(name = "crosspers", version, about = "Cross-persistence barcodes, MTD densities and Cross-RipsNet")]
pub struct Cli {
    /// Worker threads for independent jobs (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rips or cross-Rips persistence diagrams of point-cloud CSVs.
    Barcode(BarcodeArgs),
    /// Compare two clouds through the overlap of their MTD densities.
    Distinguish(DistinguishArgs),
    /// Mean inter-class overlap of a set of clouds under increasing noise.
    Sweep(SweepArgs),
    /// Train a Cross-RipsNet model.
    Train(TrainArgs),
    /// Predict densities with a trained model.
    Predict(PredictArgs),
    /// Topological features of labelled time series.
    Topgen(TopgenArgs),
    /// Logistic classification of a features CSV.
    Classify(ClassifyArgs),
    /// Built-in property and consistency checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct BarcodeArgs {
    /// One cloud, or left and right clouds with --cross.
    #[arg(required = true, num_args = 1..=2)]
    pub clouds: Vec<PathBuf>,
    #[arg(long)]
    pub cross: bool,
    /// Highest homology dimension written.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Filtration cutoff (default: enclosing radius, or the largest entry for --cross).
    #[arg(long)]
    pub max_scale: Option<f64>,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Also dump the filtration as CSV.
    #[arg(long)]
    pub filtration: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistinctionFlags {
    /// JSON config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_pairs: Option<usize>,
    #[arg(long)]
    pub subsample_size: Option<usize>,
    #[arg(long)]
    pub hom_dim: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DistinguishArgs {
    pub core: PathBuf,
    pub candidate: PathBuf,
    #[command(flatten)]
    pub flags: DistinctionFlags,
    #[arg(long, short)]
    pub out_dir: PathBuf,
    /// Also write both density curves as a PGM strip.
    #[arg(long)]
    pub pgm: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    RightOnly,
    Both,
    All,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Directory of cloud CSVs, one class per file, taken in name order.
    pub dataset: PathBuf,
    #[command(flatten)]
    pub flags: DistinctionFlags,
    /// Relative noise levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    #[arg(long, short)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    A,
    B,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReducerArg {
    Pca,
    TopkMax,
    Quantiles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest JSON (`{"pairs": [{"left", "right", "target"}]}`).
    #[arg(long, conflicts_with = "circles", required_unless_present = "circles")]
    pub manifest: Option<PathBuf>,
    /// Generate the synthetic one-circle / two-circle dataset instead.
    #[arg(long)]
    pub circles: bool,
    /// Write the generated dataset as a manifest directory.
    #[arg(long, requires = "circles")]
    pub export: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    pub reducer: Option<ReducerArg>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Drop the right-cloud encoder.
    #[arg(long)]
    pub no_right_encoder: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, requires = "right", conflicts_with = "manifest")]
    pub left: Option<PathBuf>,
    #[arg(long, requires = "left")]
    pub right: Option<PathBuf>,
    /// Target grid for a single pair; enables the sym-KL report.
    #[arg(long, requires = "left")]
    pub target: Option<PathBuf>,
    #[arg(long, required_unless_present = "left")]
    pub manifest: Option<PathBuf>,
    #[arg(long, short)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub pgm: bool,
}

#[derive(Debug, Args)]
pub struct TopgenArgs {
    /// Labelled series CSV (label first on each line).
    #[arg(long)]
    pub series: PathBuf,
    /// Labelled reference series; one random series per class when absent.
    #[arg(long)]
    pub references: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub delay: Option<usize>,
    #[arg(long)]
    pub pca_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub hom_dims: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Features CSV; a JSON report is written next to it.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ColumnsArg {
    All,
    Mtd,
    Entropy,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Features CSV written by `topgen`.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub columns: ColumnsArg,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Metrics JSON.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Barcode(a) => commands::barcode(a),
        Command::Distinguish(a) => commands::distinguish(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Topgen(a) => commands::topgen(a),
        Command::Classify(a) => commands::classify(a),
        Command::Selftest(a) => commands::selftest(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
