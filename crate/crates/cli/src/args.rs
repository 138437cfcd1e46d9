use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "impact-parity", version, about = "Compare group-blind training with per-group thresholds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic hiring data as train/test CSVs.
    Synth(SynthArgs),
    /// Fit a plain logistic regression and score the test split.
    Train(TrainArgs),
    /// Fit a covariance-constrained, group-blind logistic regression.
    Dlp(DlpArgs),
    /// Re-threshold a predictions file per group to meet a parity target.
    Threshold(ThresholdArgs),
    /// Fairness statistics of a predictions file or a raw dataset.
    Audit(AuditArgs),
    /// Run the brute-force and identity checks on random instances.
    Verify(VerifyArgs),
    /// Scatter plot of a run's flipped decisions.
    Figure(FigureArgs),
    /// Naive / DLP / threshold comparison across datasets.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub n_total: usize,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    /// Give men the wide hair-length distribution instead of women.
    #[arg(long)]
    pub literal_hair: bool,
    /// Corrupt group-b positive training labels at this rate.
    #[arg(long)]
    pub flip_rate: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset schema (JSON); the loaded data are split by `--seed`.
    #[arg(long, conflicts_with_all = ["train", "test"], required_unless_present_all = ["train", "test"])]
    pub schema: Option<PathBuf>,
    /// Canonical training CSV.
    #[arg(long, requires = "test")]
    pub train: Option<PathBuf>,
    /// Canonical test CSV.
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub learning_rate: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Add the group indicator as an input feature.
    #[arg(long)]
    pub include_group: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DlpArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Covariance bound; `inf` disables the constraint.
    #[arg(long, default_value = "0")]
    pub bound: String,
    /// Run directory of an unconstrained fit; flips against it go to fliplog.csv.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Greedy,
    Optimal,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// predictions.csv, or a run directory containing one.
    #[arg(long)]
    pub predictions: PathBuf,
    /// p-percent:P | cv:G | exact | equal-fpr
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub do_no_harm: bool,
    /// Maximum share of positive decisions.
    #[arg(long)]
    pub cap: Option<f64>,
    #[arg(long, value_enum, default_value_t = Method::Greedy)]
    pub method: Method,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct AuditSource {
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub source: AuditSource,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random instances (n ≤ 16) for the brute-force comparison.
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    /// Random finite worlds for the group-blind versus group-aware check.
    #[arg(long, default_value_t = 100)]
    pub worlds: usize,
    /// Random (decision, label) pairs for the utility identities.
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// Run directory with predictions.csv and fliplog.csv.
    #[arg(long)]
    pub run: PathBuf,
    /// Canonical CSV with the run's examples in prediction order. Defaults to
    /// the run's recorded test input.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "hair_length")]
    pub x: String,
    #[arg(long, default_value = "work_exp")]
    pub y: String,
    /// Defaults to the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Dataset schemas to include; schemas whose data file is missing are skipped.
    #[arg(long)]
    pub schema: Vec<PathBuf>,
    /// Include the synthetic hiring experiment.
    #[arg(long)]
    pub hiring: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "0")]
    pub bound: String,
    /// Accuracy slack when matching thresholds to the DLP.
    #[arg(long, default_value_t = 0.005)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: PathBuf,
}
