//! The finite-difference suite behind `s3m gradcheck`: every differentiable
//! tape op on its own, then `score_pair` and the RankNet group loss on
//! small random models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use s3m_core::autodiff::{
    gradcheck, gradcheck_with_analytic, GradcheckOptions, GradcheckReport, ParamId, ParamStore, Shape, Tape,
    Tensor, Var,
};
use s3m_core::train::{group_loss, TrainGroup};
use s3m_core::{ModelConfig, Result, S3MModel};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub seed: u64,
    pub report: GradcheckReport,
}

/// Values bounded away from zero so `abs` and `relu` stay off their kinks.
fn away_from_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m: f64 = rng.gen_range(0.2..1.5);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

type Build = Box<dyn Fn(&mut Tape, &ParamStore) -> Result<Var>>;

/// Reduces a vector to a scalar with fixed random weights so every output
/// coordinate carries a distinct gradient.
fn project(t: &mut Tape, v: Var, weights: &[f64]) -> Result<Var> {
    let w = t.input(t.shape(v), weights.to_vec())?;
    let h = t.hadamard(v, w)?;
    Ok(t.sum(h))
}

fn op_cases(seed: u64) -> Vec<(&'static str, ParamStore, Build)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 5;
    let mut cases: Vec<(&'static str, ParamStore, Build)> = Vec::new();
    let vec_param = |store: &mut ParamStore, name: &str, v: Vec<f64>| -> ParamId {
        store.add(name, Tensor::new(Shape::Vector(v.len()), v).unwrap())
    };

    macro_rules! unary {
        ($name:literal, $values:expr, $op:expr) => {{
            let mut s = ParamStore::new();
            let a = vec_param(&mut s, "a", $values);
            let w = uniform(&mut rng, n);
            let b: Build = Box::new(move |t, st| {
                let x = t.param(st, a);
                let y = $op(t, x)?;
                project(t, y, &w)
            });
            cases.push(($name, s, b));
        }};
    }
    macro_rules! binary {
        ($name:literal, $op:expr) => {{
            let mut s = ParamStore::new();
            let a = vec_param(&mut s, "a", uniform(&mut rng, n));
            let c = vec_param(&mut s, "b", uniform(&mut rng, n));
            let w = uniform(&mut rng, n);
            let b: Build = Box::new(move |t, st| {
                let x = t.param(st, a);
                let y = t.param(st, c);
                let z = $op(t, x, y)?;
                project(t, z, &w)
            });
            cases.push(($name, s, b));
        }};
    }

    unary!("sigmoid", uniform(&mut rng, n).iter().map(|x| 3.0 * x).collect(), |t: &mut Tape, x| Ok::<_, s3m_core::Error>(t.sigmoid(x)));
    unary!("tanh", uniform(&mut rng, n).iter().map(|x| 2.0 * x).collect(), |t: &mut Tape, x| Ok::<_, s3m_core::Error>(t.tanh(x)));
    unary!("relu", away_from_zero(&mut rng, n), |t: &mut Tape, x| Ok::<_, s3m_core::Error>(t.relu(x)));
    unary!("abs", away_from_zero(&mut rng, n), |t: &mut Tape, x| Ok::<_, s3m_core::Error>(t.abs(x)));
    unary!("softplus", uniform(&mut rng, n).iter().map(|x| 4.0 * x).collect(), |t: &mut Tape, x| Ok::<_, s3m_core::Error>(t.softplus(x)));
    unary!("scale", uniform(&mut rng, n), |t: &mut Tape, x| Ok::<_, s3m_core::Error>(t.scale(x, -1.7)));
    binary!("add", |t: &mut Tape, x, y| t.add(x, y));
    binary!("sub", |t: &mut Tape, x, y| t.sub(x, y));
    binary!("hadamard", |t: &mut Tape, x, y| t.hadamard(x, y));
    {
        let mut s = ParamStore::new();
        let a = vec_param(&mut s, "a", uniform(&mut rng, n));
        let c = vec_param(&mut s, "b", uniform(&mut rng, 2));
        let w = uniform(&mut rng, 2 * n + 2);
        cases.push(("concat", s, Box::new(move |t, st| {
            let x = t.param(st, a);
            let y = t.param(st, c);
            let z = t.concat(&[x, y, x])?;
            project(t, z, &w)
        })));
    }

    {
        let mut s = ParamStore::new();
        let a = vec_param(&mut s, "a", uniform(&mut rng, n));
        cases.push(("sum", s, Box::new(move |t, st| {
            let x = t.param(st, a);
            let sq = t.hadamard(x, x)?;
            Ok(t.sum(sq))
        })));
    }
    {
        let mut s = ParamStore::new();
        let w = s.add("w", Tensor::new(Shape::Matrix(4, n), uniform(&mut rng, 4 * n)).unwrap());
        let x = vec_param(&mut s, "x", uniform(&mut rng, n));
        let r = uniform(&mut rng, 4);
        cases.push(("matvec", s, Box::new(move |t, st| {
            let wv = t.param(st, w);
            let xv = t.param(st, x);
            let y = t.matvec(wv, xv)?;
            project(t, y, &r)
        })));
    }
    {
        let mut s = ParamStore::new();
        let e = s.add("table", Tensor::new(Shape::Matrix(6, 3), uniform(&mut rng, 18)).unwrap());
        let rows = [4usize, 1, 4];
        let r = uniform(&mut rng, 3);
        cases.push(("param_row", s, Box::new(move |t, st| {
            let mut acc = t.param_row(st, e, rows[0])?;
            for &row in &rows[1..] {
                let v = t.param_row(st, e, row)?;
                let v = t.hadamard(v, v)?;
                acc = t.add(acc, v)?;
            }
            project(t, acc, &r)
        })));
    }
    cases
}

fn small_model(rng: &mut ChaCha8Rng, seed: u64) -> S3MModel {
    S3MModel::init(ModelConfig {
        embed_dim: rng.gen_range(2..=4),
        hidden_dim: rng.gen_range(2..=4),
        classifier_hidden: rng.gen_range(3..=6),
        vocab_size: 8,
        seed,
    })
    .unwrap()
}

fn ids(rng: &mut ChaCha8Rng, len: usize) -> Vec<u32> {
    (0..len).map(|_| rng.gen_range(1..8)).collect()
}

/// Runs every check for one seed.
pub fn run_seed(seed: u64, opts: &GradcheckOptions, inject_bug: bool) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let run = |name: &str, store: &mut ParamStore, build: &dyn Fn(&mut Tape, &ParamStore) -> Result<Var>| {
        let report = if inject_bug {
            let mut tape = Tape::new();
            let loss = build(&mut tape, store)?;
            store.zero_grad();
            tape.backward(loss, store)?;
            let mut analytic: Vec<Vec<f64>> =
                store.ids().map(|id| store.get(id).grad().unwrap_or_default().to_vec()).collect();
            store.zero_grad();
            if let Some(g) = analytic.iter_mut().find(|g| !g.is_empty()) {
                g[0] = g[0] * 1.01 + 1e-3;
            }
            gradcheck_with_analytic(store, build, &analytic, opts)?
        } else {
            gradcheck(store, build, opts)?
        };
        Ok::<_, s3m_core::Error>(CheckResult { name: name.to_string(), seed, report })
    };
    for (name, mut store, build) in op_cases(seed) {
        out.push(run(name, &mut store, &*build)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut model = small_model(&mut rng, seed);
    let mc = *model.config();
    let a = ids(&mut rng, 3);
    let b = ids(&mut rng, 4);
    let pair = move |t: &mut Tape, st: &ParamStore| -> Result<Var> {
        let m = S3MModel::from_store(mc, st.clone())?;
        m.score_pair_on(t, &a, &b)
    };
    out.push(run("score_pair", model.store_mut(), &pair)?);

    let group = TrainGroup {
        query: ids(&mut rng, 3),
        positive: ids(&mut rng, 4),
        negatives: (0..4).map(|i| ids(&mut rng, 2 + i)).collect(),
        sources: Default::default(),
    };
    let loss = move |t: &mut Tape, st: &ParamStore| -> Result<Var> {
        group_loss(&S3MModel::from_store(mc, st.clone())?, t, &group)
    };
    out.push(run("ranknet(score_pair)", model.store_mut(), &loss)?);
    Ok(out)
}
