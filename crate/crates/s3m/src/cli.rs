use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::ConfigArgs;
use crate::dataset::DatasetFormat;
use crate::netbeans::TimeUnit;

#[derive(Debug, Parser)]
#[command(name = "s3m", version, about = "Siamese biLSTM stack trace similarity for crash report deduplication")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a report file by time into train, validation and test files.
    Prepare(PrepareArgs),
    /// Train a model on a prepared split and write a bundle.
    Train(TrainArgs),
    /// Evaluate a bundle on the test window of a prepared split.
    Eval(EvalArgs),
    /// Evaluate the prefix-match or TF-IDF baseline.
    Baseline(BaselineArgs),
    /// Train and evaluate once per trim level.
    SweepTrim(SweepArgs),
    /// Check reverse-mode gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Convert an exported bug-tracker dump into the report format.
    ConvertNetbeans(ConvertArgs),
    /// Write a synthetic crash report corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct PrepareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: DatasetFormat,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Directory written by `prepare`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_model: PathBuf,
    /// Per-epoch history as JSON lines (default: next to the bundle).
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Continue from this bundle with a fresh optimizer state.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    /// Per-query CSV: report id, rank of the true bucket, top 10 buckets.
    #[arg(long)]
    pub per_query: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Prefix,
    Tfidf,
}

#[derive(Debug, Args, Serialize)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluate at every trim level instead of `--trim`.
    #[arg(long)]
    pub trim_sweep: bool,
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Trim levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    pub levels: Vec<String>,
    /// Write one bundle per level here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct GradcheckArgs {
    /// First seed (default: $S3M_SEED or 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Corrupt one analytic gradient per check (negative control).
    #[arg(long, hide = true)]
    pub inject_bug: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "id")]
    pub id_key: String,
    /// Key naming the report this one duplicates.
    #[arg(long, default_value = "dup_id")]
    pub duplicate_key: String,
    #[arg(long, default_value = "timestamp")]
    pub timestamp_key: String,
    #[arg(long, value_enum, default_value_t)]
    pub timestamp_unit: TimeUnit,
    #[arg(long, default_value = "elements")]
    pub frames_key: String,
    #[arg(long, default_value = "name")]
    pub frame_name_key: String,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2400)]
    pub reports: usize,
    #[arg(long, default_value_t = 400)]
    pub days: u64,
    /// Default: $S3M_SEED or 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = crate::synth::DEFAULT_START)]
    pub start: u64,
    #[arg(long, default_value_t = 0.4)]
    pub sibling_rate: f64,
    /// Write the separable 30-report toy fixture instead.
    #[arg(long)]
    pub toy: bool,
}
