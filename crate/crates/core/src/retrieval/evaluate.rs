use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::metrics::{MetricsReport, RankedResult};
use super::rank::rank_buckets;
use super::{Aggregation, SimilarityMeasure};
use crate::error::Result;
use crate::split::Split;
use crate::trace::StackTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub aggregation: Aggregation,
    /// Whether earlier queries join the candidate history of later ones.
    pub include_earlier_queries: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ks: vec![1, 5, 10],
            aggregation: Aggregation::Max,
            include_earlier_queries: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub report: MetricsReport,
    /// One entry per query, chronological.
    pub results: Vec<RankedResult>,
}

/// Ranks each query (chronologically) against every strictly older trace
/// of `base` and, when enabled, of the earlier queries.
pub fn evaluate_stream<M: SimilarityMeasure + ?Sized>(
    measure: &mut M,
    base: &[&StackTrace],
    queries: &[&StackTrace],
    config: &EvalConfig,
) -> Result<EvalOutcome> {
    let mut queries = queries.to_vec();
    queries.sort_by_key(|t| t.order_key());
    let mut results = Vec::with_capacity(queries.len());
    let mut history: Vec<&StackTrace> = Vec::new();
    for (i, q) in queries.iter().enumerate() {
        history.clear();
        history.extend(base.iter().copied().filter(|t| t.timestamp < q.timestamp));
        if config.include_earlier_queries {
            history.extend(queries[..i].iter().copied().filter(|t| t.timestamp < q.timestamp));
        }
        results.push(rank_buckets(q, &history, measure, config.aggregation)?);
    }
    let report = MetricsReport::from_results(&results, &config.ks)?;
    Ok(EvalOutcome { report, results })
}

/// Test traces are the queries; train and validation form the base history.
pub fn evaluate<M: SimilarityMeasure + ?Sized>(
    measure: &mut M,
    split: &Split,
    config: &EvalConfig,
) -> Result<EvalOutcome> {
    let base: Vec<&StackTrace> = split.train_and_validation().collect();
    let queries: Vec<&StackTrace> = split.test.traces().iter().collect();
    evaluate_stream(measure, &base, &queries, config)
}
