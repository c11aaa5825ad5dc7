use super::*;
use crate::autodiff::{gradcheck, GradcheckOptions, Tape};
use alloc::vec;
use proptest::prelude::*;

fn small(seed: u64) -> S3MModel {
    S3MModel::init(ModelConfig {
        embed_dim: 3,
        hidden_dim: 4,
        classifier_hidden: 5,
        vocab_size: 8,
        seed,
    })
    .unwrap()
}

#[test]
fn init_is_seeded_and_bounded() {
    let cfg = ModelConfig::new(30, 7);
    let a = S3MModel::init(cfg).unwrap();
    let b = S3MModel::init(cfg).unwrap();
    assert_eq!(a, b);
    let c = S3MModel::init(ModelConfig { seed: 8, ..cfg }).unwrap();
    assert_ne!(a.store(), c.store());
    let bound = 1.0 / libm::sqrt(100.0);
    for (_, t) in a.store().iter() {
        assert!(t.values().iter().all(|v| v.abs() <= bound));
    }
    assert!(a.all_finite());
}

#[test]
fn shapes_follow_config() {
    let m = S3MModel::init(ModelConfig::new(12, 0)).unwrap();
    let names: Vec<&str> = m.store().iter().map(|(n, _)| n).collect();
    assert_eq!(names[0], "embedding");
    assert_eq!(names[1], "lstm_fwd.w_input");
    assert_eq!(names[20], "classifier.b2");
    let p = m.params();
    assert_eq!(m.store().get(p.embedding).shape(), Shape::Matrix(12, 50));
    assert_eq!(m.store().get(p.forward.w_forget).shape(), Shape::Matrix(100, 150));
    assert_eq!(m.store().get(p.backward.b_candidate).shape(), Shape::Vector(100));
    assert_eq!(m.store().get(p.w1).shape(), Shape::Matrix(200, 600));
    assert_eq!(m.store().get(p.w2).shape(), Shape::Matrix(1, 200));
    let enc = m.encode(&[2, 3, 4]).unwrap();
    assert_eq!(enc.len(), 200);
}

#[test]
fn rejects_invalid_configs_and_inputs() {
    assert!(S3MModel::init(ModelConfig { vocab_size: 1, ..ModelConfig::new(1, 0) }).is_err());
    assert!(S3MModel::init(ModelConfig { hidden_dim: 0, ..ModelConfig::new(5, 0) }).is_err());
    let m = small(0);
    assert_eq!(m.encode(&[]), Err(Error::EmptySequence));
    assert!(m.encode(&[8]).is_err());
    assert!(m.similarity(&[0.0; 5]).is_err());
}

#[test]
fn length_one_sequence_uses_distinct_blocks() {
    let m = small(1);
    let enc = m.encode(&[5]).unwrap();
    assert_ne!(enc.0[..4], enc.0[4..]);
}

fn tie_backward_to_forward(m: &mut S3MModel) {
    let (f, b) = (m.params().forward, m.params().backward);
    let pairs = [
        (f.w_input, b.w_input),
        (f.w_forget, b.w_forget),
        (f.w_output, b.w_output),
        (f.w_candidate, b.w_candidate),
        (f.b_input, b.b_input),
        (f.b_forget, b.b_forget),
        (f.b_output, b.b_output),
        (f.b_candidate, b.b_candidate),
    ];
    for (src, dst) in pairs {
        let v = m.store().get(src).values().to_vec();
        m.store_mut().get_mut(dst).values_mut().copy_from_slice(&v);
    }
}

#[test]
fn palindrome_with_tied_weights_has_equal_halves() {
    let mut m = small(2);
    tie_backward_to_forward(&mut m);
    let enc = m.encode(&[2, 5, 3, 5, 2]).unwrap();
    assert_eq!(enc.0[..4], enc.0[4..]);
    // Not a palindrome: halves differ.
    let enc = m.encode(&[2, 5, 3]).unwrap();
    assert_ne!(enc.0[..4], enc.0[4..]);
}

#[test]
fn encoding_depends_on_order() {
    let found = (0..20).any(|seed| {
        let m = small(seed);
        m.encode(&[2, 3]).unwrap() != m.encode(&[3, 2]).unwrap()
    });
    assert!(found);
    let m = small(0);
    assert_ne!(m.encode(&[2, 3]).unwrap(), m.encode(&[3, 2]).unwrap());
}

#[test]
fn features_hand_cases() {
    let f = features(&Encoding(vec![1.0, -1.0]), &Encoding(vec![3.0, 1.0])).unwrap();
    assert_eq!(f, vec![2.0, 2.0, 2.0, 0.0, 3.0, -1.0]);
    let v = Encoding(vec![0.5, -2.0, 3.0]);
    let f = features(&v, &v).unwrap();
    assert_eq!(f, vec![0.0, 0.0, 0.0, 0.5, -2.0, 3.0, 0.25, 4.0, 9.0]);
    assert!(features(&v, &Encoding(vec![1.0])).is_err());
}

#[test]
fn head_hand_cases() {
    assert_eq!(head_score(&[1.0], &[0.0], &[2.0], &[1.0], &[3.0]), 7.0);
    // Negative pre-activation is cut by the ReLU.
    assert_eq!(head_score(&[1.0], &[0.0], &[2.0], &[1.0], &[-3.0]), 1.0);

    let mut m = small(3);
    let p = *m.params();
    for id in [p.w1, p.b1, p.w2] {
        m.store_mut().get_mut(id).values_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    m.store_mut().get_mut(p.b2).values_mut()[0] = -1.25;
    assert_eq!(m.score_pair(&[2, 3], &[4]).unwrap(), -1.25);
}

#[test]
fn tape_and_inference_paths_agree_bitwise() {
    for seed in 0..5 {
        let m = small(seed);
        let (a, b) = (vec![2, 3, 4, 7], vec![5, 1, 6]);
        let mut tape = Tape::new();
        let va = m.encode_on(&mut tape, &a).unwrap();
        assert_eq!(tape.value(va), m.encode(&a).unwrap().as_slice());
        let s = m.score_pair_on(&mut tape, &a, &b).unwrap();
        assert_eq!(tape.scalar(s).unwrap(), m.score_pair(&a, &b).unwrap());
    }
}

#[test]
fn self_score_is_degenerate_feature_score() {
    let m = small(4);
    let e = m.encode(&[2, 3, 4]).unwrap();
    let s = m.score_pair(&[2, 3, 4], &[2, 3, 4]).unwrap();
    assert!(s.is_finite());
    assert_eq!(s, m.similarity(&features(&e, &e).unwrap()).unwrap());
}

#[test]
fn cached_encodings_match_recomputation() {
    let m = small(5);
    let traces = [vec![2, 3], vec![4, 5, 6], vec![7], vec![3, 3, 3, 2]];
    let cache: Vec<Encoding> = traces.iter().map(|t| m.encode(t).unwrap()).collect();
    for (i, a) in traces.iter().enumerate() {
        for (j, b) in traces.iter().enumerate() {
            assert_eq!(m.score_encodings(&cache[i], &cache[j]).unwrap(), m.score_pair(a, b).unwrap());
        }
    }
}

#[test]
fn score_pair_gradcheck() {
    for seed in 0..10 {
        let mut m = small(seed);
        let (a, b) = (vec![2, 3, 4], vec![5, 6, 2, 7]);
        let cfg = *m.config();
        let report = gradcheck(
            m.store_mut(),
            |tape, store| {
                let model = S3MModel::from_store(cfg, store.clone())?;
                model.score_pair_on(tape, &a, &b)
            },
            &GradcheckOptions {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.passed, "seed {seed}: {report:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn score_is_symmetric(
        seed in 0u64..1000,
        a in prop::collection::vec(0u32..8, 1..12),
        b in prop::collection::vec(0u32..8, 1..12),
    ) {
        let m = small(seed);
        prop_assert_eq!(m.score_pair(&a, &b).unwrap().to_bits(), m.score_pair(&b, &a).unwrap().to_bits());
    }

    #[test]
    fn output_shapes_hold(
        embed in 1usize..5, hidden in 1usize..5, cls in 1usize..5, vocab in 2usize..6,
        ids in prop::collection::vec(0u32..2, 1..6),
    ) {
        let m = S3MModel::init(ModelConfig { embed_dim: embed, hidden_dim: hidden, classifier_hidden: cls, vocab_size: vocab, seed: 1 }).unwrap();
        let e = m.encode(&ids).unwrap();
        prop_assert_eq!(e.len(), 2 * hidden);
        prop_assert_eq!(features(&e, &e).unwrap().len(), 6 * hidden);
        prop_assert!(m.score_pair(&ids, &ids).unwrap().is_finite());
    }
}
