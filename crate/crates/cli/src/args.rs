use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "swag", version, about = "Covariance shrinkage within and across groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the sampler on a dataset and write posterior estimates.
    Fit(FitArgs),
    /// Compare estimators on synthetic data from one of four regimes.
    Simulate(SimulateArgs),
    /// Quadratic discriminant analysis with several covariance estimators.
    Classify(ClassifyArgs),
    /// Effective sample sizes and autocorrelations of a draws file.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("swag_out"))
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Schedule {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub schedule: Schedule,
    /// Skip per-group standardization (columns are still centered).
    #[arg(long = "no-standardize", overrides_with = "standardize")]
    pub no_standardize: bool,
    /// Standardize columns per group before fitting (the default).
    #[arg(long, overrides_with = "no_standardize")]
    pub standardize: bool,
    /// Write wall-clock time into the run manifest. Outputs are then no
    /// longer byte-identical across runs.
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// One of ho-k, he-k, ho-n, he-n.
    #[arg(long)]
    pub regime: String,
    #[arg(long = "J", default_value_t = 4)]
    pub groups: usize,
    #[arg(long, default_value_t = 2)]
    pub p1: usize,
    #[arg(long, default_value_t = 3)]
    pub p2: usize,
    /// Observations per group; defaults to p1 * p2 + 1.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub schedule: Schedule,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    /// Training dataset manifest.
    #[arg(long)]
    pub train: PathBuf,
    /// Test dataset manifest; labels must appear in the training set.
    #[arg(long)]
    pub test: PathBuf,
    /// Comma-separated subset of swag, mle, pooled, kron, blend.
    #[arg(long, default_value = "swag,mle,pooled,kron,blend", value_delimiter = ',')]
    pub methods: Vec<String>,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub schedule: Schedule,
    #[arg(long = "no-standardize", overrides_with = "standardize")]
    pub no_standardize: bool,
    #[arg(long, overrides_with = "no_standardize")]
    pub standardize: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    /// A draws container written by `swag fit`.
    #[arg(long)]
    pub draws: PathBuf,
    /// Elements to extract as traces, `group:row:col` (1-based), comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub elements: Vec<String>,
    #[command(flatten)]
    pub common: Common,
}
