use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Buckets ranked for one query, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedResult {
    pub query_report_id: u64,
    pub truth_bucket: u64,
    /// `(bucket_id, score)`, scores non-increasing, ties by ascending id.
    pub ranking: Vec<(u64, f64)>,
    /// 1-based position of the true bucket, if it had any earlier trace.
    pub rank_of_truth: Option<usize>,
}

impl RankedResult {
    pub fn top(&self, k: usize) -> impl Iterator<Item = u64> + '_ {
        self.ranking.iter().take(k).map(|&(b, _)| b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mrr: f64,
    #[serde(rename = "rr")]
    pub rr_at: BTreeMap<usize, f64>,
    pub n_queries: usize,
    pub n_skipped: usize,
}

fn evaluable(results: &[RankedResult]) -> Result<Vec<usize>> {
    let ranks: Vec<usize> = results.iter().filter_map(|r| r.rank_of_truth).collect();
    if ranks.is_empty() {
        return Err(Error::NoEvaluableQueries);
    }
    Ok(ranks)
}

/// Mean reciprocal rank over queries whose true bucket was rankable.
pub fn mrr(results: &[RankedResult]) -> Result<f64> {
    let ranks = evaluable(results)?;
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// Fraction of rankable queries whose true bucket is in the top `k`.
pub fn rr_at_k(results: &[RankedResult], k: usize) -> Result<f64> {
    let ranks = evaluable(results)?;
    Ok(ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64)
}

impl MetricsReport {
    pub fn from_results(results: &[RankedResult], ks: &[usize]) -> Result<Self> {
        let mrr = mrr(results)?;
        let mut rr_at = BTreeMap::new();
        for &k in ks {
            rr_at.insert(k, rr_at_k(results, k)?);
        }
        let n_queries = results.iter().filter(|r| r.rank_of_truth.is_some()).count();
        Ok(MetricsReport {
            mrr,
            rr_at,
            n_queries,
            n_skipped: results.len() - n_queries,
        })
    }
}
