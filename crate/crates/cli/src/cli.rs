//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "resvar",
    version,
    about = "Robust residual variance testing for model evaluation and selection",
    after_help = "Exit codes: 0 success, 2 usage error, 3 I/O failure, \
                  4 model-fitting failure, 5 data contract violation."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset as CSV plus a JSON metadata sidecar.
    Generate(GenerateArgs),
    /// Preprocess a tabular CSV: drop columns, log the target, remove
    /// Tukey-outlier rows.
    Preprocess(PreprocessArgs),
    /// Train a model on a dataset and save it as a versioned JSON document.
    Train(TrainArgs),
    /// Extract out-of-sample residuals by cross-validation or out-of-bag
    /// bootstrap.
    Residuals(ResidualsArgs),
    /// Run the variance equality test (and optional diagnostics) on two
    /// residual files.
    Test(TestArgs),
    /// Reproduce a full simulation experiment and emit its tables.
    Experiment(ExperimentArgs),
    /// Estimate Type I error or power of a variance test by Monte Carlo.
    Montecarlo(MontecarloArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorName {
    Simdata1,
    Simdata2,
    Simdata3,
    Simdata4,
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Which synthetic dataset to generate.
    #[arg(long, value_enum)]
    pub generator: GeneratorName,
    /// Number of rows.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Generator seed.
    #[arg(long, env = "RESVAR_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path (the sidecar lands next to it).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PreprocessArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the target column in the input.
    #[arg(long, default_value = "target")]
    pub target: String,
    /// Comma-separated feature columns to drop.
    #[arg(long, value_delimiter = ',')]
    pub drop: Vec<String>,
    /// Apply a natural log to the target.
    #[arg(long, default_value_t = false)]
    pub log_target: bool,
    /// Remove rows with at least this many per-feature Tukey outliers.
    #[arg(long, default_value_t = 2)]
    pub max_outliers: usize,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelFamily {
    Poly,
    Net,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Relu,
    Tanh,
    Logistic,
    Linear,
}

impl From<ActivationArg> for resvar::Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Relu => resvar::Activation::Relu,
            ActivationArg::Tanh => resvar::Activation::Tanh,
            ActivationArg::Logistic => resvar::Activation::Logistic,
            ActivationArg::Linear => resvar::Activation::Linear,
        }
    }
}

/// Model selection flags shared by `train` and `residuals`.
#[derive(Args)]
pub struct ModelArgs {
    /// Model family (ignored when --model-file is given).
    #[arg(long, value_enum)]
    pub model: Option<ModelFamily>,
    /// Load the model spec from a saved model JSON instead of flags.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    /// Polynomial degree.
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    /// Restrict the polynomial basis to pure powers (no cross terms).
    #[arg(long, default_value_t = false)]
    pub no_interactions: bool,
    /// Full network architecture, input width first (e.g. 2,8,8,1).
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
    /// Hidden-layer activation.
    #[arg(long, value_enum, default_value_t = ActivationArg::Relu)]
    pub activation: ActivationArg,
    /// Training epochs.
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Minibatch size.
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    /// Weight initialization seed.
    #[arg(long, default_value_t = 0)]
    pub init_seed: u64,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Input dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the target column.
    #[arg(long, default_value = "target")]
    pub target: String,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output model JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Kfold,
    Oob,
}

#[derive(Args)]
pub struct ResidualsArgs {
    /// Input dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the target column.
    #[arg(long, default_value = "target")]
    pub target: String,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Residual generation protocol.
    #[arg(long, value_enum, default_value_t = SchemeArg::Kfold)]
    pub scheme: SchemeArg,
    /// Number of folds (kfold scheme).
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Number of bootstrap rounds (oob scheme); defaults to the sample size.
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Upper bound on bootstrap rounds (each round retrains the model).
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Resampling seed.
    #[arg(long, env = "RESVAR_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output residual CSV path (sidecar lands next to it).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Classic,
    Hc4,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlternativeArg {
    TwoSided,
    Less,
    Greater,
}

impl From<AlternativeArg> for resvar::Alternative {
    fn from(a: AlternativeArg) -> Self {
        match a {
            AlternativeArg::TwoSided => resvar::Alternative::TwoSided,
            AlternativeArg::Less => resvar::Alternative::Less,
            AlternativeArg::Greater => resvar::Alternative::Greater,
        }
    }
}

#[derive(Args)]
pub struct TestArgs {
    /// Residual CSV of model A.
    #[arg(long)]
    pub residuals_a: PathBuf,
    /// Residual CSV of model B.
    #[arg(long)]
    pub residuals_b: PathBuf,
    /// Variance test variant.
    #[arg(long, value_enum, default_value_t = MethodArg::Hc4)]
    pub method: MethodArg,
    /// Alternative hypothesis; greater means Var(A) > Var(B).
    #[arg(long, value_enum, default_value_t = AlternativeArg::TwoSided)]
    pub alternative: AlternativeArg,
    /// Also run the companion diagnostics (bias, paired t, lag-1
    /// independence, Wasserstein distances, KDE curves).
    #[arg(long, default_value_t = false)]
    pub diagnostics: bool,
    /// Permutations for the independence diagnostic.
    #[arg(long, default_value_t = 999)]
    pub permutations: usize,
    /// Seed for the permutation test.
    #[arg(long, env = "RESVAR_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Report JSON path; KDE curve CSVs land next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentName {
    Simdata1,
    Simdata2,
    Simdata3,
    Simdata4,
}

#[derive(Args)]
pub struct ExperimentArgs {
    /// Which experiment recipe to run.
    #[arg(long, value_enum)]
    pub name: ExperimentName,
    /// Base seed; run r uses seed + r.
    #[arg(long, env = "RESVAR_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Number of Monte Carlo runs (defaults to the recipe's own count).
    #[arg(long)]
    pub runs: Option<usize>,
    /// Desk-scale factor applied to runs and epochs.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Output directory for the report bundle.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Normal,
    T,
}

#[derive(Args)]
pub struct MontecarloArgs {
    /// Flat key=value config file mirroring these flags (flags win).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replications.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Sample size per replication.
    #[arg(long)]
    pub n: Option<usize>,
    /// Significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Which variance test to calibrate.
    #[arg(long, value_enum)]
    pub test: Option<MethodArg>,
    /// First sample family.
    #[arg(long, value_enum)]
    pub null_family: Option<FamilyArg>,
    /// First sample scale (standard-deviation multiplier).
    #[arg(long)]
    pub null_scale: Option<f64>,
    /// Degrees of freedom when the first family is t.
    #[arg(long)]
    pub null_df: Option<f64>,
    /// Second sample family.
    #[arg(long, value_enum)]
    pub alt_family: Option<FamilyArg>,
    /// Second sample scale.
    #[arg(long)]
    pub alt_scale: Option<f64>,
    /// Degrees of freedom when the second family is t.
    #[arg(long)]
    pub alt_df: Option<f64>,
    /// Base seed; replication r uses base_seed + r.
    #[arg(long, env = "RESVAR_SEED")]
    pub base_seed: Option<u64>,
    /// Retain per-replication p-values in the report.
    #[arg(long, default_value_t = false)]
    pub keep_p_values: bool,
    /// Optional CSV path for the retained p-values.
    #[arg(long)]
    pub p_values_csv: Option<PathBuf>,
    /// Variance ratios for a power curve (comma separated); when given the
    /// report holds one entry per ratio.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Vec<f64>,
    /// Report JSON path.
    #[arg(long)]
    pub out: PathBuf,
}
