use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpens_core::{BaseMode, Sampling};

#[derive(Debug, Parser)]
#[command(name = "cpens", version, about = "Conformal-prediction ensembles of naive Bayes classifiers")]
pub struct Cli {
    /// Worker threads for training and prediction (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic two-class cohort as CSV.
    GenData(GenDataArgs),
    /// Build an ensemble and save it.
    Train(TrainArgs),
    /// Score examples with a saved ensemble.
    Predict(PredictArgs),
    /// Cross-validate a parameter grid.
    Evaluate(EvaluateArgs),
    /// Compare configurations on shared folds with significance tests.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 402)]
    pub n: usize,
    #[arg(long, default_value_t = 41)]
    pub features: usize,
    /// Fraction of sMCI examples.
    #[arg(long, default_value_t = 0.56)]
    pub balance: f64,
    /// Distance between the class means in standard deviations.
    #[arg(long, default_value_t = 1.0)]
    pub separation: f64,
    /// Fraction of examples whose features come from the other class.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Conformal,
    Posterior,
    Plain,
}

impl From<ModeArg> for BaseMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Conformal => BaseMode::ConformalCredibility,
            ModeArg::Posterior => BaseMode::StandardPosterior,
            ModeArg::Plain => BaseMode::StandardPlain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    Bootstrap,
    Identity,
}

impl From<SamplingArg> for Sampling {
    fn from(s: SamplingArg) -> Self {
        match s {
            SamplingArg::Bootstrap => Sampling::Bootstrap,
            SamplingArg::Identity => Sampling::Identity,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 50)]
    pub n_estimators: usize,
    #[arg(long, default_value_t = 0.75)]
    pub feature_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    pub bootstrap_fraction: f64,
    #[arg(long, value_enum, default_value_t = SamplingArg::Bootstrap)]
    pub sampling: SamplingArg,
    /// Stored with the model; `predict --threshold` overrides it.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Conformal)]
    pub base_mode: ModeArg,
    #[arg(long, default_value_t = 0.8)]
    pub report_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub model_out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Credibility threshold; every member votes when omitted.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    /// Class treated as positive for sensitivity and F-measure.
    #[arg(long, default_value = "cMCI")]
    pub positive_class: String,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long, value_delimiter = ',', default_value = "25,50,100")]
    pub n_estimators: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    pub feature_fractions: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.75,0.8,0.85,0.9,0.95")]
    pub thresholds: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "conformal,posterior,plain")]
    pub base_modes: Vec<ModeArg>,
    #[arg(long, default_value_t = 1.0)]
    pub bootstrap_fraction: f64,
    #[arg(long, default_value_t = 0.8)]
    pub report_fraction: f64,
    /// Leave out the single naive Bayes baseline.
    #[arg(long)]
    pub no_simple_nb: bool,
    /// Machine-readable CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Human-readable summary; stderr when omitted.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Configuration, e.g. `mode=conformal,n=50,ff=0.75,threshold=0.85` or `simple-nb`. Repeat at least twice.
    #[arg(long = "config", required = true)]
    pub configs: Vec<String>,
    /// Report file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
