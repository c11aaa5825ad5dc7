use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::metrics::RankedResult;
use super::{Aggregation, SimilarityMeasure};
use crate::error::{Error, Result};
use crate::trace::StackTrace;

/// Scores every bucket present in `history` against `query`.
///
/// Every history trace must be strictly older than the query; anything else
/// is rejected as a temporal leak. An empty history yields an empty ranking.
pub fn rank_buckets<M: SimilarityMeasure + ?Sized>(
    query: &StackTrace,
    history: &[&StackTrace],
    measure: &mut M,
    aggregation: Aggregation,
) -> Result<RankedResult> {
    if let Some(bad) = history
        .iter()
        .find(|t| t.timestamp >= query.timestamp || t.report_id == query.report_id)
    {
        return Err(Error::TemporalLeak {
            query: query.report_id,
            candidate: bad.report_id,
        });
    }
    measure.prepare(query, history)?;
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for t in history {
        let s = measure.score(query, t);
        acc.entry(t.bucket_id)
            .and_modify(|(best, n)| {
                match aggregation {
                    Aggregation::Max => {
                        if s > *best {
                            *best = s
                        }
                    }
                    Aggregation::Mean => *best += s,
                }
                *n += 1;
            })
            .or_insert((s, 1));
    }
    let mut ranking: Vec<(u64, f64)> = acc
        .into_iter()
        .map(|(b, (s, n))| match aggregation {
            Aggregation::Max => (b, s),
            Aggregation::Mean => (b, s / n as f64),
        })
        .collect();
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let rank_of_truth = ranking
        .iter()
        .position(|&(b, _)| b == query.bucket_id)
        .map(|p| p + 1);
    Ok(RankedResult {
        query_report_id: query.report_id,
        truth_bucket: query.bucket_id,
        ranking,
        rank_of_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use alloc::vec;
    use proptest::prelude::*;

    /// Looks up a fixed score per candidate report id.
    struct Table(BTreeMap<u64, f64>);

    impl SimilarityMeasure for Table {
        fn name(&self) -> &str {
            "table"
        }
        fn score(&self, _q: &StackTrace, c: &StackTrace) -> f64 {
            self.0[&c.report_id]
        }
    }

    /// 1 if the first frames are equal.
    struct TopFrameEq;

    impl SimilarityMeasure for TopFrameEq {
        fn name(&self) -> &str {
            "top-frame"
        }
        fn score(&self, q: &StackTrace, c: &StackTrace) -> f64 {
            (q.frames()[0] == c.frames()[0]) as u8 as f64
        }
    }

    fn tr(id: u64, bucket: u64, ts: u64, frames: &[&str]) -> StackTrace {
        StackTrace::from_names(id, bucket, ts, frames).unwrap()
    }

    #[test]
    fn single_duplicate_ranks_first() {
        let h = tr(1, 4, 10, &["a.b"]);
        let q = tr(2, 4, 20, &["a.b"]);
        let r = rank_buckets(&q, &[&h], &mut TopFrameEq, Aggregation::Max).unwrap();
        assert_eq!(r.rank_of_truth, Some(1));
    }

    #[test]
    fn ties_break_by_bucket_id() {
        let hs = [tr(1, 1, 1, &["x"]), tr(2, 2, 1, &["x"]), tr(3, 3, 1, &["x"])];
        let q = tr(9, 3, 5, &["x"]);
        let mut m = Table(BTreeMap::from([(1, 0.9), (2, 0.5), (3, 0.5)]));
        let refs: Vec<&StackTrace> = hs.iter().collect();
        let r = rank_buckets(&q, &refs, &mut m, Aggregation::Max).unwrap();
        assert_eq!(r.ranking, vec![(1, 0.9), (2, 0.5), (3, 0.5)]);
        assert_eq!(r.rank_of_truth, Some(3));
    }

    #[test]
    fn mean_aggregation_and_empty_history() {
        let hs = [tr(1, 1, 1, &["x"]), tr(2, 1, 1, &["x"]), tr(3, 2, 1, &["x"])];
        let refs: Vec<&StackTrace> = hs.iter().collect();
        let mut m = Table(BTreeMap::from([(1, 1.0), (2, 0.0), (3, 0.6)]));
        let q = tr(9, 1, 5, &["x"]);
        let r = rank_buckets(&q, &refs, &mut m, Aggregation::Mean).unwrap();
        assert_eq!(r.ranking, vec![(2, 0.6), (1, 0.5)]);
        let r = rank_buckets(&q, &[], &mut m, Aggregation::Max).unwrap();
        assert!(r.ranking.is_empty());
        assert_eq!(r.rank_of_truth, None);
    }

    #[test]
    fn rejects_non_earlier_history() {
        let h = tr(1, 1, 20, &["x"]);
        let q = tr(2, 1, 20, &["x"]);
        assert_eq!(
            rank_buckets(&q, &[&h], &mut TopFrameEq, Aggregation::Max),
            Err(Error::TemporalLeak { query: 2, candidate: 1 })
        );
    }

    fn brute_force(q: &StackTrace, history: &[StackTrace], m: &dyn SimilarityMeasure) -> (Vec<(u64, f64)>, Option<usize>) {
        let mut buckets: Vec<u64> = history.iter().map(|t| t.bucket_id).collect();
        buckets.sort_unstable();
        buckets.dedup();
        let mut scored: Vec<(u64, f64)> = buckets
            .iter()
            .map(|&b| {
                let best = history
                    .iter()
                    .filter(|t| t.bucket_id == b)
                    .map(|t| m.score(q, t))
                    .fold(f64::NEG_INFINITY, f64::max);
                (b, best)
            })
            .collect();
        // Selection sort by (score desc, id asc) as an independent ordering.
        let mut out = Vec::new();
        while !scored.is_empty() {
            let mut best = 0;
            for i in 1..scored.len() {
                let (b, s) = scored[i];
                let (bb, bs) = scored[best];
                if s > bs || (s == bs && b < bb) {
                    best = i;
                }
            }
            out.push(scored.remove(best));
        }
        let rank = out.iter().position(|&(b, _)| b == q.bucket_id).map(|p| p + 1);
        (out, rank)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn matches_brute_force(
            traces in prop::collection::vec((0u64..10, 0usize..4, 0usize..4), 1..50),
            q_bucket in 0u64..10,
            q_frame in 0usize..4,
        ) {
            let frames = ["a.A", "b.B", "c.C", "d.D"];
            let mut per_bucket: BTreeMap<u64, usize> = BTreeMap::new();
            let history: Vec<StackTrace> = traces
                .iter()
                .enumerate()
                .filter(|(_, (b, _, _))| {
                    let n = per_bucket.entry(*b).or_default();
                    *n += 1;
                    *n <= 5
                })
                .map(|(i, &(b, f1, f2))| tr(i as u64, b, 1, &[frames[f1], frames[f2]]))
                .collect();
            let q = tr(1000, q_bucket, 2, &[frames[q_frame]]);
            let refs: Vec<&StackTrace> = history.iter().collect();
            let got = rank_buckets(&q, &refs, &mut TopFrameEq, Aggregation::Max).unwrap();
            let (ranking, rank) = brute_force(&q, &history, &TopFrameEq);
            prop_assert_eq!(got.ranking, ranking);
            prop_assert_eq!(got.rank_of_truth, rank);
        }
    }
}
