//! Time-aware duplicate retrieval: bucket ranking, RR@k / MRR, and the
//! prefix-match and TF-IDF baselines.

mod evaluate;
mod metrics;
mod neural;
mod prefix;
mod rank;
mod tfidf;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::trace::StackTrace;

pub use evaluate::{evaluate, evaluate_stream, EvalConfig, EvalOutcome};
pub use metrics::{mrr, rr_at_k, MetricsReport, RankedResult};
pub use neural::NeuralMeasure;
pub use prefix::{prefix_match, PrefixMatch};
pub use rank::rank_buckets;
pub use tfidf::{build_tfidf_index, tfidf_score, TfIdfIndex, TfIdfMeasure};

/// A scoring contract between a query trace and a candidate trace; higher
/// means more similar. Scores must be deterministic.
pub trait SimilarityMeasure {
    fn name(&self) -> &str;

    /// Called once per query, before any `score` call for it, with the
    /// candidate history. Measures use it to build caches or statistics.
    fn prepare(&mut self, _query: &StackTrace, _history: &[&StackTrace]) -> Result<()> {
        Ok(())
    }

    fn score(&self, query: &StackTrace, candidate: &StackTrace) -> f64;
}

/// How trace-level scores become a bucket score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}
