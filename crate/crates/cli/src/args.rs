use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "clustcv", version, about = "Choose the number of k-means clusters by cross-validation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select k for a data matrix by bi-cross-validation.
    Select(SelectArgs),
    /// Select k by speckled (entry-wise) holdout.
    Wold(WoldArgs),
    /// Within-cluster dispersion for k = 1..k_max.
    Elbow(ElbowArgs),
    /// Run a simulation setting over many replicates.
    Simulate(SimulateArgs),
    /// Compare single-fold selections with the closed-form predictions.
    Verify(VerifyArgs),
    /// Repeat selection over several seeds on benchmark datasets.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
}

impl GridArgs {
    pub fn grid(&self) -> anyhow::Result<Vec<usize>> {
        anyhow::ensure!(
            1 <= self.k_min && self.k_min <= self.k_max,
            "need 1 <= --k-min <= --k-max, got {}..{}",
            self.k_min,
            self.k_max
        );
        Ok((self.k_min..=self.k_max).collect())
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FoldArgs {
    /// Row folds K.
    #[arg(long, default_value_t = 5)]
    pub row_folds: usize,
    /// Column folds L.
    #[arg(long, default_value_t = 2)]
    pub col_folds: usize,
    /// k-means restarts per fit.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectArgs {
    /// CSV data file; optional header, `NA` marks missing cells.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub folds: FoldArgs,
    /// Apply the correlation correction (same as `--method corrected`).
    #[arg(long)]
    pub corrected: bool,
    /// Selector name: gabriel, corrected or wold.
    #[arg(long, default_value = "gabriel")]
    pub method: String,
    /// Drop rows with missing entries first.
    #[arg(long)]
    pub complete_cases: bool,
    /// Per-fold errors instead of per-k means (CSV only).
    #[arg(long)]
    pub long: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WoldArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Fraction of entries hidden per fold.
    #[arg(long, default_value_t = 0.1)]
    pub holdout: f64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub long: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ElbowArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub complete_cases: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingName {
    Correlated,
    NoiseDims,
    HighDim,
    VarHetero,
    HeavyTail,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// JSON simulation spec; alternative to --setting/--param.
    #[arg(long, conflicts_with_all = ["setting", "param"])]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, requires = "param")]
    pub setting: Option<SettingName>,
    /// rho, r, dims, ratio or nu depending on the setting.
    #[arg(long)]
    pub param: Option<f64>,
    /// Fixed center scale instead of the calibrated one.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,
    #[arg(long, value_delimiter = ',', default_value = "gabriel,corrected,wold")]
    pub methods: Vec<String>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 5)]
    pub row_folds: usize,
    #[arg(long, default_value_t = 2)]
    pub col_folds: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Base seed; overrides the seed in --config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Single,
    Two,
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// `single`: correlated single cluster; `two`: symmetric two-cluster grid.
    #[arg(long, value_enum, default_value_t = Experiment::All)]
    pub experiment: Experiment,
    /// Observations per replicate.
    #[arg(long, default_value_t = 20000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub rhos: Vec<f64>,
    /// Largest k tried in the single-cluster sweep.
    #[arg(long, default_value_t = 5)]
    pub k_max: usize,
    /// Grid step over [0, 3] x [0, 3] for the two-cluster sweep.
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    /// Skip grid points closer than this to the theoretical boundary.
    #[arg(long, default_value_t = 0.0)]
    pub min_distance: f64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchmarkArgs {
    /// Directory holding `<name>.csv` files.
    #[arg(long, default_value = "data")]
    pub data_dir: PathBuf,
    /// Dataset names (file stems); default: every data file in the directory.
    #[arg(long, value_delimiter = ',')]
    pub datasets: Vec<String>,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "gabriel,corrected,wold")]
    pub methods: Vec<String>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
}
