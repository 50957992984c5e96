use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use geoproto_core::kproto::SpatialRule;
use geoproto_core::IntervalCenter;

#[derive(Debug, Parser)]
#[command(
    name = "geoproto",
    version,
    about = "Clustering and mortality experience analysis for mixed numerical, categorical, and geospatial portfolios"
)]
pub struct Cli {
    /// Cap on worker threads (overrides GEOPROTO_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Increase log verbosity (-v: debug, -vv: trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Log errors only.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize a dataset per attribute (CSV on stdout).
    Inspect(InspectArgs),
    /// Estimate the balance weights and print them as JSON.
    Lambda(LambdaArgs),
    /// Fit a k-prototypes model and write assignments and the model.
    Cluster(ClusterArgs),
    /// Choose k by the gap statistic, then refit the full data at that k.
    #[command(name = "select-k")]
    SelectK(SelectKArgs),
    /// Per-cluster actual-to-expected mortality report.
    Experience(ExperienceArgs),
    /// Geodetic distance in meters between two coordinate pairs.
    Dist(DistArgs),
    /// Generate a synthetic portfolio with planted clusters.
    Synth(SynthArgs),
}

/// Flags shared by every subcommand that reads a dataset.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV (header row required).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Schema config TOML describing the input columns.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Run config TOML; flags win over config values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct LambdaArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpatialRuleArg {
    /// Move the prototype to the member coordinate nearest its previous one.
    NearestToPrevious,
    /// Minimize the summed geodetic distance over member coordinates.
    Medoid,
}

impl From<SpatialRuleArg> for SpatialRule {
    fn from(value: SpatialRuleArg) -> SpatialRule {
        match value {
            SpatialRuleArg::NearestToPrevious => SpatialRule::NearestToPrevious,
            SpatialRuleArg::Medoid => SpatialRule::Medoid,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CenterArg {
    /// Band around the no-deviation ratio 1.
    Null,
    /// Band around the observed ratio.
    Observed,
}

impl From<CenterArg> for IntervalCenter {
    fn from(value: CenterArg) -> IntervalCenter {
        match value {
            CenterArg::Null => IntervalCenter::Null,
            CenterArg::Observed => IntervalCenter::Observed,
        }
    }
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of clusters.
    #[arg(long)]
    pub k: Option<usize>,
    /// Independent seeded restarts; the best final cost wins.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Iteration cap per restart.
    #[arg(long = "max-iter")]
    pub max_iterations: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Categorical weight override (estimated when absent).
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Spatial weight override, per meter (estimated when absent).
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Prototype update rule for the spatial pair.
    #[arg(long, value_enum)]
    pub spatial_rule: Option<SpatialRuleArg>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectKArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Largest candidate k (k_max + 1 is also fitted for the decision rule).
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Number of reference replicates.
    #[arg(long = "B")]
    pub replicates: Option<usize>,
    /// Subsample fraction used for selection.
    #[arg(long)]
    pub sample_fraction: Option<f64>,
    /// Comma-separated categorical attributes defining sampling strata.
    #[arg(long, value_delimiter = ',')]
    pub strata: Option<Vec<String>>,
    /// Independent seeded restarts per fit.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Iteration cap per restart.
    #[arg(long = "max-iter")]
    pub max_iterations: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Categorical weight override (estimated on the subsample when absent).
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Spatial weight override, per meter (estimated on the subsample when absent).
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Prototype update rule for the spatial pair.
    #[arg(long, value_enum)]
    pub spatial_rule: Option<SpatialRuleArg>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperienceArgs {
    /// Run config TOML; flags win over config values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Assignments CSV (id, cluster) as written by cluster or select-k.
    #[arg(long)]
    pub assignments: Option<PathBuf>,
    /// Portfolio CSV with id, face_amount, death, and expected_rate columns.
    #[arg(long)]
    pub portfolio: Option<PathBuf>,
    /// Rate table CSV keyed by (age, sex, smoker) supplying expected_rate
    /// when the portfolio has no such column.
    #[arg(long)]
    pub rate_table: Option<PathBuf>,
    /// Comma-separated confidence levels.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Where to center the confidence band.
    #[arg(long, value_enum)]
    pub center: Option<CenterArg>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct DistArgs {
    /// First latitude in decimal degrees.
    pub lat1: f64,
    /// First longitude in decimal degrees.
    pub lon1: f64,
    /// Second latitude in decimal degrees.
    pub lat2: f64,
    /// Second longitude in decimal degrees.
    pub lon2: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Run config TOML; flags win over config values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generator spec TOML (cluster mixture, level weights, mortality).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Shortcut: plant this many well-separated clusters instead of --spec.
    #[arg(long, conflicts_with = "spec")]
    pub clusters: Option<usize>,
    /// Record count for --clusters.
    #[arg(long, requires = "clusters", conflicts_with = "spec")]
    pub records: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
