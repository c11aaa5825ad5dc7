//! Run configuration: a JSON file whose keys mirror the long flag names,
//! overridden by flags. `S3M_SEED` supplies the seed when neither sets it.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use s3m_core::retrieval::{Aggregation, EvalConfig};
use s3m_core::train::TrainConfig;
use s3m_core::{ModelConfig, TrimLevel};

use crate::error::{Error, Result};

pub const SEED_ENV: &str = "S3M_SEED";

fn parse_aggregation(s: &str) -> std::result::Result<Aggregation, String> {
    match s {
        "max" => Ok(Aggregation::Max),
        "mean" => Ok(Aggregation::Mean),
        _ => Err(format!("unknown aggregation `{s}` (expected max or mean)")),
    }
}

/// Every tunable, all optional. Used both as flags and as the file layer.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Knobs {
    /// Seed for initialization, sampling and shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Frame trim level, 0 (function) to 3.
    #[arg(long)]
    pub trim: Option<u32>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Frames kept per trace, top of stack first.
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub negatives_k: Option<usize>,
    /// TF-IDF buckets that hard negatives come from.
    #[arg(long)]
    pub candidate_pool: Option<usize>,
    /// Global gradient norm cap (off by default).
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub classifier_hidden: Option<usize>,
    /// Cutoffs for RR@k, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    /// Bucket score from trace scores: max or mean.
    #[arg(long, value_parser = parse_aggregation)]
    pub aggregation: Option<Aggregation>,
    /// Whether earlier test reports join the candidate history.
    #[arg(long)]
    pub include_earlier_queries: Option<bool>,
    #[arg(long)]
    pub train_days: Option<u64>,
    #[arg(long)]
    pub val_days: Option<u64>,
    #[arg(long)]
    pub test_days: Option<u64>,
    /// Window start, Unix seconds (default: earliest report).
    #[arg(long)]
    pub start: Option<u64>,
}

impl Knobs {
    /// `self` wins wherever it is set.
    pub fn over(self, base: Knobs) -> Knobs {
        macro_rules! pick {
            ($($f:ident),*) => { Knobs { $($f: self.$f.or(base.$f)),* } };
        }
        pick!(
            seed, trim, epochs, lr, max_len, negatives_k, candidate_pool, clip_norm, embed_dim, hidden_dim,
            classifier_hidden, ks, aggregation, include_earlier_queries, train_days, val_days, test_days, start
        )
    }

    pub fn from_file(path: &Path) -> Result<Knobs> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct ConfigArgs {
    /// JSON file with defaults for any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub knobs: Knobs,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    pub seed: u64,
    pub trim: TrimLevel,
    pub epochs: usize,
    pub lr: f64,
    pub max_len: usize,
    pub negatives_k: usize,
    pub candidate_pool: usize,
    pub clip_norm: Option<f64>,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub classifier_hidden: usize,
    pub ks: Vec<usize>,
    pub aggregation: Aggregation,
    pub include_earlier_queries: bool,
    pub train_days: u64,
    pub val_days: u64,
    pub test_days: u64,
    pub start: Option<u64>,
    /// Paths and command-specific settings, for the record.
    pub command: serde_json::Value,
}

impl RunConfig {
    pub fn resolve(args: &ConfigArgs, env_seed: Option<&str>) -> Result<RunConfig> {
        let file = match &args.config {
            Some(p) => Knobs::from_file(p)?,
            None => Knobs::default(),
        };
        let k = args.knobs.clone().over(file);
        let env_seed = match env_seed {
            Some(s) => Some(
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Usage(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?,
            ),
            None => None,
        };
        let train = TrainConfig::default();
        let model = ModelConfig::new(2, 0);
        let eval = EvalConfig::default();
        let cfg = RunConfig {
            seed: k.seed.or(env_seed).unwrap_or(0),
            trim: TrimLevel::new(k.trim.unwrap_or(0))?,
            epochs: k.epochs.unwrap_or(train.epochs),
            lr: k.lr.unwrap_or(train.lr),
            max_len: k.max_len.unwrap_or(train.max_len),
            negatives_k: k.negatives_k.unwrap_or(train.negatives_k),
            candidate_pool: k.candidate_pool.unwrap_or(train.candidate_pool),
            clip_norm: k.clip_norm.or(train.clip_norm),
            embed_dim: k.embed_dim.unwrap_or(model.embed_dim),
            hidden_dim: k.hidden_dim.unwrap_or(model.hidden_dim),
            classifier_hidden: k.classifier_hidden.unwrap_or(model.classifier_hidden),
            ks: k.ks.unwrap_or(eval.ks),
            aggregation: k.aggregation.unwrap_or(eval.aggregation),
            include_earlier_queries: k.include_earlier_queries.unwrap_or(eval.include_earlier_queries),
            train_days: k.train_days.unwrap_or(4200),
            val_days: k.val_days.unwrap_or(140),
            test_days: k.test_days.unwrap_or(700),
            start: k.start,
            command: serde_json::Value::Null,
        };
        if cfg.ks.is_empty() || cfg.ks.contains(&0) {
            return Err(Error::Usage("--ks needs at least one cutoff, each at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn with_command(mut self, command: impl Serialize) -> Self {
        self.command = serde_json::to_value(command).expect("command args serialize");
        self
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            ks: self.ks.clone(),
            aggregation: self.aggregation,
            include_earlier_queries: self.include_earlier_queries,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            seed: self.seed,
            trim_level: self.trim,
            max_len: self.max_len,
            negatives_k: self.negatives_k,
            candidate_pool: self.candidate_pool,
            clip_norm: self.clip_norm,
            eval: self.eval_config(),
        }
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            classifier_hidden: self.classifier_hidden,
            vocab_size,
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
