use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use s3m_core::retrieval::{
    evaluate, evaluate_stream, rank_buckets, Aggregation, EvalConfig, NeuralMeasure, SimilarityMeasure,
    TfIdfMeasure,
};
use s3m_core::train::{build_groups, resume, train, TrainConfig};
use s3m_core::{
    build_vocab, time_split, tokenize, Dataset, ModelConfig, Result, S3MModel, Split, StackTrace, TrimLevel,
};

const DAY: u64 = 86_400;

/// Buckets share a common bottom; each has two private top frames.
fn corpus(seed: u64, n_buckets: u64, per_bucket: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traces = Vec::new();
    let mut id = 0;
    for b in 0..n_buckets {
        for _ in 0..per_bucket {
            id += 1;
            let mut frames = vec![format!("app.m{b}.Site.fail"), format!("app.m{b}.Caller.call{}", rng.gen_range(0..2))];
            for k in 0..rng.gen_range(1..4) {
                frames.push(format!("lib.shared.Path{}.step", (b + k) % 3));
            }
            frames.push("java.lang.Thread.run".into());
            traces.push(StackTrace::from_names(id, b, rng.gen_range(0..30) * DAY + id, &frames).unwrap());
        }
    }
    Dataset::new(traces).unwrap()
}

fn small_model(vocab_size: usize, seed: u64) -> S3MModel {
    S3MModel::init(ModelConfig { embed_dim: 6, hidden_dim: 6, classifier_hidden: 8, vocab_size, seed }).unwrap()
}

fn split(seed: u64) -> Split {
    let ds = corpus(seed, 8, 5);
    time_split(&ds, 20, 4, 6, 0).unwrap()
}

#[test]
fn tokenize_examples() {
    let t = StackTrace::from_names(1, 1, 0, &["a.B.m", "a.B.n"]).unwrap();
    assert_eq!(tokenize(&t, TrimLevel::CLASS, 100), vec!["a.B", "a.B"]);
    let long: Vec<String> = (0..150).map(|i| format!("p.C.m{i}")).collect();
    let t = StackTrace::from_names(2, 1, 0, &long).unwrap();
    assert_eq!(tokenize(&t, TrimLevel::FUNCTION, 100).len(), 100);
    assert_eq!(tokenize(&t, TrimLevel::FUNCTION, 200), long);
}

#[test]
fn vocab_example() {
    let ds = Dataset::new(vec![
        StackTrace::from_names(1, 1, 0, &["c.D.x"]).unwrap(),
        StackTrace::from_names(2, 1, 1, &["a.B.y"]).unwrap(),
    ])
    .unwrap();
    let v = build_vocab(&ds, TrimLevel::CLASS).unwrap();
    assert_eq!(v.len(), 4);
    assert_eq!(v.encode(&["a.B", "zzz"]).unwrap(), vec![2, 1]);
    assert_eq!(v.encode(&["c.D", "c.D"]).unwrap(), vec![3, 3]);
    assert!(v.encode::<&str>(&[]).is_err());
    assert_eq!(build_vocab(&ds, TrimLevel::CLASS).unwrap(), v);
}

proptest! {
    #[test]
    fn encoded_length_is_min_of_frames_and_max_len(n in 1usize..40, max_len in 1usize..50, level in 0u32..4) {
        let frames: Vec<String> = (0..n).map(|i| format!("p{}.C{}.m{i}", i % 3, i % 5)).collect();
        let t = StackTrace::from_names(1, 1, 0, &frames).unwrap();
        let ds = Dataset::new(vec![t.clone()]).unwrap();
        let v = build_vocab(&ds, TrimLevel::new(level).unwrap()).unwrap();
        prop_assert_eq!(v.encode_trace(&t, max_len).len(), n.min(max_len));
    }
}

#[test]
fn negatives_never_share_the_query_bucket() {
    let s = split(3);
    let vocab = build_vocab(&s.train, TrimLevel::FUNCTION).unwrap();
    let cfg = TrainConfig::default();
    let mut tfidf = TfIdfMeasure::frozen(s.train.traces(), cfg.trim_level);
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups = build_groups(&s.train, &vocab, &mut tfidf, &cfg, &mut rng).unwrap();
        assert!(!groups.is_empty());
        for g in groups {
            let src = &g.sources;
            assert_eq!(g.negatives.len(), 4);
            assert!(src.negative_buckets.iter().all(|&b| b != src.query_bucket));
            assert_ne!(src.positive_report, src.query_report);
        }
    }
}

#[test]
fn metrics_invariants_on_trained_model() {
    let s = split(5);
    let vocab = build_vocab(&s.train, TrimLevel::FUNCTION).unwrap();
    let cfg = TrainConfig { epochs: 2, lr: 1e-3, ..Default::default() };
    let out = train(small_model(vocab.len(), 1), &vocab, &s, &cfg).unwrap();
    let mut m = NeuralMeasure::new(&out.model, &vocab, cfg.max_len).unwrap();
    let r = evaluate(&mut m, &s, &EvalConfig { ks: vec![1, 2, 5, 10, 1000], ..Default::default() }).unwrap();
    let rr: Vec<f64> = r.report.rr_at.values().copied().collect();
    assert!(rr.windows(2).all(|w| w[0] <= w[1]));
    assert!(rr[0] <= r.report.mrr && r.report.mrr <= 1.0);
    assert_eq!(rr[4], 1.0);

    let mut uncached = NeuralMeasure::new(&out.model, &vocab, cfg.max_len).unwrap().without_cache();
    let r2 = evaluate(&mut uncached, &s, &EvalConfig::default()).unwrap();
    let r1 = evaluate(&mut m, &s, &EvalConfig::default()).unwrap();
    assert_eq!(r1.results, r2.results);
}

struct Shifted<'a, M>(M, f64, std::marker::PhantomData<&'a ()>);

impl<M: SimilarityMeasure> SimilarityMeasure for Shifted<'_, M> {
    fn name(&self) -> &str {
        "shifted"
    }
    fn prepare(&mut self, q: &StackTrace, h: &[&StackTrace]) -> Result<()> {
        self.0.prepare(q, h)
    }
    fn score(&self, q: &StackTrace, c: &StackTrace) -> f64 {
        self.0.score(q, c) + self.1
    }
}

#[test]
fn ranking_invariant_under_score_shift() {
    let s = split(8);
    let vocab = build_vocab(&s.train, TrimLevel::FUNCTION).unwrap();
    let model = small_model(vocab.len(), 4);
    let history: Vec<&StackTrace> = s.train.traces().iter().collect();
    for q in s.test.traces() {
        let mut a = NeuralMeasure::new(&model, &vocab, 100).unwrap();
        let mut b = Shifted(NeuralMeasure::new(&model, &vocab, 100).unwrap(), 0.75, Default::default());
        let ra = rank_buckets(q, &history, &mut a, Aggregation::Max).unwrap();
        let rb = rank_buckets(q, &history, &mut b, Aggregation::Max).unwrap();
        let ids = |r: &s3m_core::retrieval::RankedResult| r.ranking.iter().map(|x| x.0).collect::<Vec<_>>();
        assert_eq!(ids(&ra), ids(&rb));
        assert_eq!(ra.rank_of_truth, rb.rank_of_truth);
    }
}

#[test]
fn no_query_sees_itself_or_the_future() {
    struct Spy(Vec<(u64, u64, u64, u64)>);
    impl SimilarityMeasure for Spy {
        fn name(&self) -> &str {
            "spy"
        }
        fn score(&self, _: &StackTrace, _: &StackTrace) -> f64 {
            0.0
        }
        fn prepare(&mut self, q: &StackTrace, h: &[&StackTrace]) -> Result<()> {
            for c in h {
                self.0.push((q.report_id, q.timestamp, c.report_id, c.timestamp));
            }
            Ok(())
        }
    }
    let s = split(2);
    let mut spy = Spy(Vec::new());
    let base: Vec<&StackTrace> = s.train_and_validation().collect();
    let queries: Vec<&StackTrace> = s.test.traces().iter().collect();
    evaluate_stream(&mut spy, &base, &queries, &EvalConfig::default()).unwrap();
    assert!(!spy.0.is_empty());
    assert!(spy.0.iter().all(|&(q, qt, c, ct)| q != c && ct < qt));
}

#[test]
fn resume_is_close_to_but_not_identical_with_a_fresh_run() {
    let s = split(11);
    let vocab = build_vocab(&s.train, TrimLevel::FUNCTION).unwrap();
    let one = TrainConfig { epochs: 1, lr: 1e-3, ..Default::default() };
    let two = TrainConfig { epochs: 2, ..one.clone() };
    let fresh = train(small_model(vocab.len(), 2), &vocab, &s, &two).unwrap();
    let first = train(small_model(vocab.len(), 2), &vocab, &s, &one).unwrap();
    let resumed = resume(first.model, &vocab, &s, &one, |_, _| {}).unwrap();
    let values = |m: &S3MModel| m.store().iter().flat_map(|(_, t)| t.values().to_vec()).collect::<Vec<f64>>();
    assert_eq!(fresh.best_epoch, 2);
    assert_ne!(values(&fresh.model), values(&resumed.model));
    let a = fresh.history[1].mean_loss;
    let b = resumed.history[0].mean_loss;
    assert!((a - b).abs() < 0.5, "{a} vs {b}");
}
