//! Tape-free inference.

use alloc::vec;
use alloc::vec::Vec;

use super::{LstmParams, S3MModel};
use crate::autodiff::{kernels, ParamStore, Shape};
use crate::error::{Error, Result};

/// Final forward hidden state followed by final backward hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding(pub Vec<f64>);

impl Encoding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

struct LstmView<'a> {
    w: [&'a [f64]; 4],
    b: [&'a [f64]; 4],
}

impl<'a> LstmView<'a> {
    fn new(store: &'a ParamStore, p: &LstmParams) -> Self {
        let v = |id| store.get(id).values();
        LstmView {
            w: [v(p.w_input), v(p.w_forget), v(p.w_output), v(p.w_candidate)],
            b: [v(p.b_input), v(p.b_forget), v(p.b_output), v(p.b_candidate)],
        }
    }

    fn run<'e>(&self, hidden: usize, steps: impl Iterator<Item = &'e [f64]>) -> Vec<f64> {
        let mut h = vec![0.0; hidden];
        let mut c = vec![0.0; hidden];
        let mut z = Vec::new();
        let mut gates = [vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden]];
        for x in steps {
            z.clear();
            z.extend_from_slice(x);
            z.extend_from_slice(&h);
            for (k, out) in gates.iter_mut().enumerate() {
                kernels::matvec(self.w[k], &z, out);
                for (o, b) in out.iter_mut().zip(self.b[k]) {
                    *o += b;
                    *o = if k == 3 { kernels::tanh(*o) } else { kernels::sigmoid(*o) };
                }
            }
            let [i, f, o, g] = &gates;
            for j in 0..hidden {
                c[j] = f[j] * c[j] + i[j] * g[j];
                h[j] = o[j] * kernels::tanh(c[j]);
            }
        }
        h
    }
}

impl S3MModel {
    /// Encodes an id sequence with both LSTM directions.
    pub fn encode(&self, ids: &[u32]) -> Result<Encoding> {
        self.check_ids(ids)?;
        let e = self.config.embed_dim;
        let table = self.store.get(self.params.embedding).values();
        let row = |id: &u32| &table[*id as usize * e..(*id as usize + 1) * e];
        let h = self.config.hidden_dim;
        let fwd = LstmView::new(&self.store, &self.params.forward).run(h, ids.iter().map(row));
        let bwd = LstmView::new(&self.store, &self.params.backward).run(h, ids.iter().rev().map(row));
        let mut out = fwd;
        out.extend_from_slice(&bwd);
        Ok(Encoding(out))
    }

    /// Head score of a feature vector: `W2 relu(W1 f + b1) + b2`.
    pub fn similarity(&self, f: &[f64]) -> Result<f64> {
        let want = self.config.feature_dim();
        if f.len() != want {
            return Err(Error::ShapeMismatch {
                op: "similarity",
                left: Shape::Vector(want),
                right: Shape::Vector(f.len()),
            });
        }
        let v = |id| self.store.get(id).values();
        Ok(head_score(v(self.params.w1), v(self.params.b1), v(self.params.w2), v(self.params.b2), f))
    }

    /// Score of two already-encoded traces.
    pub fn score_encodings(&self, a: &Encoding, b: &Encoding) -> Result<f64> {
        self.similarity(&features(a, b)?)
    }

    /// Siamese score: both traces go through the same encoder weights.
    pub fn score_pair(&self, ids1: &[u32], ids2: &[u32]) -> Result<f64> {
        let (a, b) = (self.encode(ids1)?, self.encode(ids2)?);
        self.score_encodings(&a, &b)
    }
}

/// `(|v1 - v2|, (v1 + v2) / 2, v1 ⊙ v2)` concatenated in that order.
pub fn features(v1: &Encoding, v2: &Encoding) -> Result<Vec<f64>> {
    let (a, b) = (v1.as_slice(), v2.as_slice());
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            op: "features",
            left: Shape::Vector(a.len()),
            right: Shape::Vector(b.len()),
        });
    }
    let mut out = Vec::with_capacity(3 * a.len());
    out.extend(a.iter().zip(b).map(|(x, y)| libm::fabs(x - y)));
    out.extend(a.iter().zip(b).map(|(x, y)| (x + y) * 0.5));
    out.extend(a.iter().zip(b).map(|(x, y)| x * y));
    Ok(out)
}

/// Two-layer ReLU network over raw weight slices; `w1` is `[k x f.len()]`,
/// `w2` is `[1 x k]`.
pub fn head_score(w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64], f: &[f64]) -> f64 {
    let mut hidden = vec![0.0; b1.len()];
    kernels::matvec(w1, f, &mut hidden);
    for (h, b) in hidden.iter_mut().zip(b1) {
        *h = kernels::relu(*h + b);
    }
    kernels::dot(w2, &hidden) + b2[0]
}
