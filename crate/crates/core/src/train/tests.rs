use super::*;
use crate::autodiff::{gradcheck, GradcheckOptions};
use crate::model::ModelConfig;
use alloc::string::String;
use alloc::vec;

/// 5 buckets x 4 traces; every bucket has its own frame names.
pub(crate) fn separable_split() -> Split {
    let mut train = Vec::new();
    let mut id = 0;
    for round in 0..4u64 {
        for b in 0..5u64 {
            id += 1;
            let frames: Vec<String> = (0..4)
                .map(|k| alloc::format!("org.b{b}.C{}.m{}", k, (k + round) % 4))
                .collect();
            train.push(StackTrace::from_names(id, b, round * 100 + b * 10, &frames).unwrap());
        }
    }
    let mut val = Vec::new();
    for b in 0..5u64 {
        let frames: Vec<String> = (0..4).map(|k| alloc::format!("org.b{b}.C{k}.m{k}")).collect();
        val.push(StackTrace::from_names(100 + b, b, 1000 + b, &frames).unwrap());
    }
    let test = vec![StackTrace::from_names(200, 0, 2000, &["org.b0.C0.m0"]).unwrap()];
    Split::from_partitions(
        Dataset::new(train).unwrap(),
        Dataset::new(val).unwrap(),
        Dataset::new(test).unwrap(),
    )
    .unwrap()
}

fn tiny_model(vocab: &Vocabulary, seed: u64) -> S3MModel {
    S3MModel::init(ModelConfig {
        embed_dim: 8,
        hidden_dim: 8,
        classifier_hidden: 16,
        vocab_size: vocab.len(),
        seed,
    })
    .unwrap()
}

#[test]
fn rejects_bad_configs() {
    let split = separable_split();
    let vocab = build_vocab(&split.train, TrimLevel::FUNCTION).unwrap();
    let model = tiny_model(&vocab, 0);
    let cfg = TrainConfig {
        epochs: 0,
        ..Default::default()
    };
    assert!(matches!(train(model.clone(), &vocab, &split, &cfg), Err(Error::InvalidConfig(_))));
    let cfg = TrainConfig {
        trim_level: TrimLevel::CLASS,
        ..Default::default()
    };
    assert!(matches!(train(model, &vocab, &split, &cfg), Err(Error::ModelMismatch(_))));
}

#[test]
fn deterministic_given_seed() {
    let split = separable_split();
    let vocab = build_vocab(&split.train, TrimLevel::FUNCTION).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        lr: 1e-3,
        ..Default::default()
    };
    let a = train(tiny_model(&vocab, 1), &vocab, &split, &cfg).unwrap();
    let b = train(tiny_model(&vocab, 1), &vocab, &split, &cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model, b.model);
    assert_eq!(a.groups_per_epoch, 15);
}

#[test]
fn group_loss_gradcheck() {
    let split = separable_split();
    let vocab = build_vocab(&split.train, TrimLevel::FUNCTION).unwrap();
    let cfg = TrainConfig::default();
    let mut idx = TfIdfMeasure::frozen(split.train.traces(), cfg.trim_level);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let groups = build_groups(&split.train, &vocab, &mut idx, &cfg, &mut rng).unwrap();
    let mut model = S3MModel::init(ModelConfig {
        embed_dim: 3,
        hidden_dim: 3,
        classifier_hidden: 4,
        vocab_size: vocab.len(),
        seed: 2,
    })
    .unwrap();
    let mc = *model.config();
    let group = groups[3].clone();
    let report = gradcheck(
        model.store_mut(),
        |tape, store| group_loss(&S3MModel::from_store(mc, store.clone())?, tape, &group),
        &GradcheckOptions {
            max_coords_per_param: Some(12),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn resume_checks_vocabulary_and_continues() {
    let split = separable_split();
    let vocab = build_vocab(&split.train, TrimLevel::FUNCTION).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        lr: 1e-3,
        ..Default::default()
    };
    let first = train(tiny_model(&vocab, 3), &vocab, &split, &cfg).unwrap();
    let more = resume(first.model.clone(), &vocab, &split, &cfg, |_, _| {}).unwrap();
    assert!(more.history[0].mean_loss.is_finite());

    let wrong = TrainConfig {
        trim_level: TrimLevel::CLASS,
        ..cfg.clone()
    };
    assert!(resume(first.model.clone(), &vocab, &split, &wrong, |_, _| {}).is_err());

    let other = Vocabulary::from_tokens(vocab.tokens().iter().rev().map(|s| String::from(*s)).collect(), TrimLevel::FUNCTION).unwrap();
    assert!(matches!(resume(first.model, &other, &split, &cfg, |_, _| {}), Err(Error::ModelMismatch(_))));
}

fn default_model(vocab: &Vocabulary, seed: u64) -> S3MModel {
    S3MModel::init(ModelConfig::new(vocab.len(), seed)).unwrap()
}

#[test]
fn toy_overfit_reaches_perfect_training_mrr() {
    let split = separable_split();
    let vocab = build_vocab(&split.train, TrimLevel::FUNCTION).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        ..Default::default()
    };
    let mut per_epoch = Vec::new();
    let out = train_with(default_model(&vocab, 0), &vocab, &split, &cfg, |_, m| {
        let r = training_queries_report(m, &vocab, cfg.max_len, &split.train, &cfg.eval).unwrap();
        per_epoch.push(r.mrr);
    })
    .unwrap();
    let first = per_epoch.iter().position(|&m| m == 1.0);
    assert!(first.is_some(), "training MRR per epoch: {per_epoch:?}");

    let tie = 4.0 * core::f64::consts::LN_2;
    assert!((out.step_losses[0] - tie).abs() < 0.05, "{}", out.step_losses[0]);

    // Window means over the first 100 steps have a negative least-squares slope.
    let w: Vec<f64> = out.step_losses[..100].chunks(10).map(|c| c.iter().sum::<f64>() / 10.0).collect();
    let n = w.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = w.iter().sum::<f64>() / n;
    let slope: f64 = w.iter().enumerate().map(|(i, y)| (i as f64 - xm) * (y - ym)).sum();
    assert!(slope < 0.0, "{w:?}");
    assert!(w[9] < w[0]);
    assert!(out.history.last().unwrap().mean_loss < out.history[0].mean_loss);
}
