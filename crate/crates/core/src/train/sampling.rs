//! (query, positive, negatives) groups with TF-IDF hard negatives.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::retrieval::{rank_buckets, Aggregation, TfIdfMeasure};
use crate::trace::{Dataset, StackTrace};
use crate::vocab::Vocabulary;

/// One training example: a query, a duplicate of it and `k` non-duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainGroup {
    pub query: Vec<u32>,
    pub positive: Vec<u32>,
    pub negatives: Vec<Vec<u32>>,
    pub sources: GroupSources,
}

/// Report and bucket ids behind a [`TrainGroup`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroupSources {
    pub query_report: u64,
    pub query_bucket: u64,
    pub positive_report: u64,
    pub negative_reports: Vec<u64>,
    pub negative_buckets: Vec<u64>,
    /// How many negatives came from the TF-IDF candidate pool.
    pub hard_negatives: usize,
}

#[derive(Debug, Clone)]
struct Plan {
    query: usize,
    positives: Vec<usize>,
    /// Earlier traces of the top-ranked foreign buckets.
    hard_pool: Vec<usize>,
    /// All earlier foreign traces grouped by bucket.
    foreign: BTreeMap<u64, Vec<usize>>,
}

/// Per-query candidate structure, computed once over the train window and
/// resampled every epoch.
#[derive(Debug, Clone)]
pub struct NegativeSampler<'d> {
    traces: &'d [StackTrace],
    encoded: Vec<Vec<u32>>,
    plans: Vec<Plan>,
    negatives_k: usize,
    /// Reports that had a positive but too few earlier foreign traces.
    pub skipped_sparse: usize,
}

impl<'d> NegativeSampler<'d> {
    /// A report becomes a query only if its bucket has a strictly earlier
    /// report. Negatives come from the `candidate_pool` buckets that the
    /// TF-IDF index ranks highest (truth excluded) among buckets seen
    /// strictly before the query.
    pub fn new(
        train: &'d Dataset,
        vocab: &Vocabulary,
        tfidf: &mut TfIdfMeasure,
        max_len: usize,
        negatives_k: usize,
        candidate_pool: usize,
    ) -> Result<Self> {
        let traces = train.traces();
        let encoded = traces.iter().map(|t| vocab.encode_trace(t, max_len)).collect();
        let mut plans = Vec::new();
        let mut skipped_sparse = 0;
        let mut earlier_end = 0;
        for (qi, q) in traces.iter().enumerate() {
            while traces[earlier_end].timestamp < q.timestamp {
                earlier_end += 1;
            }
            let earlier = &traces[..earlier_end];
            let positives: Vec<usize> = (0..earlier_end)
                .filter(|&j| earlier[j].bucket_id == q.bucket_id)
                .collect();
            if positives.is_empty() {
                continue;
            }
            let mut foreign: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for (j, t) in earlier.iter().enumerate() {
                if t.bucket_id != q.bucket_id {
                    foreign.entry(t.bucket_id).or_default().push(j);
                }
            }
            if foreign.values().map(Vec::len).sum::<usize>() < negatives_k {
                skipped_sparse += 1;
                continue;
            }
            let refs: Vec<&StackTrace> = earlier.iter().collect();
            let ranked = rank_buckets(q, &refs, tfidf, Aggregation::Max)?;
            let hard_pool = ranked
                .ranking
                .iter()
                .filter(|&&(b, _)| b != q.bucket_id)
                .take(candidate_pool)
                .flat_map(|(b, _)| foreign[b].iter().copied())
                .collect();
            plans.push(Plan {
                query: qi,
                positives,
                hard_pool,
                foreign,
            });
        }
        if plans.is_empty() {
            return Err(Error::NoTrainingGroups);
        }
        Ok(NegativeSampler {
            traces,
            encoded,
            plans,
            negatives_k,
            skipped_sparse,
        })
    }

    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    /// Draws one group per query: a uniform earlier positive, `k` negatives
    /// uniformly without replacement from the hard pool, topped up from
    /// uniformly chosen foreign buckets when the pool is too small.
    pub fn sample_epoch<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<TrainGroup> {
        self.plans.iter().map(|p| self.sample(p, rng)).collect()
    }

    fn sample<R: Rng + ?Sized>(&self, plan: &Plan, rng: &mut R) -> TrainGroup {
        let k = self.negatives_k;
        let positive = plan.positives[rng.gen_range(0..plan.positives.len())];
        let mut chosen: Vec<usize> = if plan.hard_pool.len() >= k {
            index::sample(rng, plan.hard_pool.len(), k)
                .into_iter()
                .map(|i| plan.hard_pool[i])
                .collect()
        } else {
            plan.hard_pool.clone()
        };
        let hard_negatives = chosen.len();
        if chosen.len() < k {
            let mut remaining: Vec<(u64, Vec<usize>)> = plan
                .foreign
                .iter()
                .map(|(&b, ts)| (b, ts.iter().copied().filter(|j| !chosen.contains(j)).collect::<Vec<_>>()))
                .filter(|(_, ts)| !ts.is_empty())
                .collect();
            while chosen.len() < k {
                let bi = rng.gen_range(0..remaining.len());
                let bucket = &mut remaining[bi].1;
                let ti = rng.gen_range(0..bucket.len());
                chosen.push(bucket.swap_remove(ti));
                if bucket.is_empty() {
                    remaining.swap_remove(bi);
                }
            }
        }
        let q = &self.traces[plan.query];
        TrainGroup {
            query: self.encoded[plan.query].clone(),
            positive: self.encoded[positive].clone(),
            negatives: chosen.iter().map(|&j| self.encoded[j].clone()).collect(),
            sources: GroupSources {
                query_report: q.report_id,
                query_bucket: q.bucket_id,
                positive_report: self.traces[positive].report_id,
                negative_reports: chosen.iter().map(|&j| self.traces[j].report_id).collect(),
                negative_buckets: chosen.iter().map(|&j| self.traces[j].bucket_id).collect(),
                hard_negatives,
            },
        }
    }
}

/// Builds the sampler over `train` and draws one epoch of groups.
pub fn build_groups<R: Rng + ?Sized>(
    train: &Dataset,
    vocab: &Vocabulary,
    tfidf: &mut TfIdfMeasure,
    config: &super::TrainConfig,
    rng: &mut R,
) -> Result<Vec<TrainGroup>> {
    let sampler = NegativeSampler::new(
        train,
        vocab,
        tfidf,
        config.max_len,
        config.negatives_k,
        config.candidate_pool,
    )?;
    Ok(sampler.sample_epoch(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::TrainConfig;
    use crate::trace::TrimLevel;
    use crate::vocab::build_vocab;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(id: u64, bucket: u64, ts: u64, frames: &[&str]) -> StackTrace {
        StackTrace::from_names(id, bucket, ts, frames).unwrap()
    }

    fn setup(ds: &Dataset, cfg: &TrainConfig, seed: u64) -> Vec<TrainGroup> {
        let vocab = build_vocab(ds, cfg.trim_level).unwrap();
        let mut idx = TfIdfMeasure::frozen(ds.traces(), cfg.trim_level);
        build_groups(ds, &vocab, &mut idx, cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    /// Query bucket Q; bucket B shares frames with Q, bucket C does not.
    fn two_foreign_buckets(b_size: usize) -> Dataset {
        let mut ts = 0;
        let mut id = 0;
        let mut next = |bucket: u64, frames: &[&str]| {
            ts += 1;
            id += 1;
            tr(id, bucket, ts, frames)
        };
        let mut v = vec![next(1, &["q.Q.a", "s.S.b", "s.S.c"])];
        for _ in 0..b_size {
            v.push(next(2, &["b.B.a", "s.S.b", "s.S.c"]));
        }
        for _ in 0..6 {
            v.push(next(3, &["c.C.x", "c.C.y"]));
        }
        v.push(next(1, &["q.Q.a", "s.S.b", "s.S.c"]));
        Dataset::new(v).unwrap()
    }

    #[test]
    fn first_report_of_a_bucket_is_never_a_query() {
        let ds = two_foreign_buckets(4);
        let groups = setup(&ds, &TrainConfig::default(), 0);
        let mut seen = BTreeMap::new();
        for t in ds.traces() {
            seen.entry(t.bucket_id).or_insert(t.report_id);
        }
        for g in &groups {
            assert!(!seen.values().any(|&first| first == g.sources.query_report));
        }
    }

    #[test]
    fn hard_negatives_come_from_closest_bucket() {
        let ds = two_foreign_buckets(4);
        let cfg = TrainConfig {
            candidate_pool: 1,
            ..Default::default()
        };
        for seed in 0..10 {
            let groups = setup(&ds, &cfg, seed);
            let last = groups.iter().find(|g| g.sources.query_bucket == 1).unwrap();
            assert_eq!(last.sources.negative_buckets, vec![2; 4]);
            assert_eq!(last.sources.hard_negatives, 4);
            let mut reports = last.sources.negative_reports.clone();
            reports.sort_unstable();
            reports.dedup();
            assert_eq!(reports.len(), 4);
        }
    }

    #[test]
    fn small_pool_is_topped_up() {
        let ds = two_foreign_buckets(2);
        let cfg = TrainConfig {
            candidate_pool: 1,
            ..Default::default()
        };
        let groups = setup(&ds, &cfg, 3);
        let last = groups.iter().find(|g| g.sources.query_bucket == 1).unwrap();
        assert_eq!(last.sources.hard_negatives, 2);
        let from_b = last.sources.negative_buckets.iter().filter(|&&b| b == 2).count();
        let from_c = last.sources.negative_buckets.iter().filter(|&&b| b == 3).count();
        assert_eq!((from_b, from_c), (2, 2));
    }

    #[test]
    fn negatives_never_share_the_query_bucket() {
        let mut v = Vec::new();
        for i in 0..60u64 {
            let b = i % 7;
            let f0 = alloc::format!("m{}.C{}.f", b % 3, b);
            let f1 = alloc::format!("m{}.D.g{}", i % 4, i % 5);
            v.push(tr(i, b, i + i % 3, &[f0.as_str(), f1.as_str(), "j.T.run"]));
        }
        let ds = Dataset::new(v).unwrap();
        for seed in 0..5 {
            let groups = setup(&ds, &TrainConfig { trim_level: TrimLevel::CLASS, ..Default::default() }, seed);
            assert!(!groups.is_empty());
            let by_id: BTreeMap<u64, &StackTrace> = ds.traces().iter().map(|t| (t.report_id, t)).collect();
            for g in &groups {
                let q = by_id[&g.sources.query_report];
                let p = by_id[&g.sources.positive_report];
                assert_eq!(p.bucket_id, q.bucket_id);
                assert_ne!(p.report_id, q.report_id);
                assert!(p.timestamp < q.timestamp);
                assert_eq!(g.negatives.len(), 4);
                for r in &g.sources.negative_reports {
                    assert_ne!(by_id[r].bucket_id, q.bucket_id);
                    assert!(by_id[r].timestamp < q.timestamp);
                }
            }
        }
    }

    #[test]
    fn no_groups_is_fatal() {
        let ds = Dataset::new(vec![tr(1, 1, 1, &["a"]), tr(2, 2, 2, &["b"])]).unwrap();
        let vocab = build_vocab(&ds, TrimLevel::FUNCTION).unwrap();
        let mut idx = TfIdfMeasure::frozen(ds.traces(), TrimLevel::FUNCTION);
        let cfg = TrainConfig::default();
        assert_eq!(
            build_groups(&ds, &vocab, &mut idx, &cfg, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::NoTrainingGroups)
        );
    }
}
