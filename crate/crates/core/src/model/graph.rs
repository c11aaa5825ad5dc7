//! The same network recorded on a tape, for training and gradient checks.

use alloc::vec::Vec;

use super::{LstmParams, S3MModel};
use crate::autodiff::{ParamStore, Shape, Tape, Var};
use crate::error::Result;

fn lstm(tape: &mut Tape, store: &ParamStore, p: &LstmParams, hidden: usize, inputs: &[Var]) -> Result<Var> {
    let w = [p.w_input, p.w_forget, p.w_output, p.w_candidate].map(|id| tape.param(store, id));
    let b = [p.b_input, p.b_forget, p.b_output, p.b_candidate].map(|id| tape.param(store, id));
    let mut h = tape.input(Shape::Vector(hidden), alloc::vec![0.0; hidden])?;
    let mut c = h;
    for &x in inputs {
        let z = tape.concat(&[x, h])?;
        let mut pre = [h; 4];
        for k in 0..4 {
            let wz = tape.matvec(w[k], z)?;
            pre[k] = tape.add(wz, b[k])?;
        }
        let i = tape.sigmoid(pre[0]);
        let f = tape.sigmoid(pre[1]);
        let o = tape.sigmoid(pre[2]);
        let g = tape.tanh(pre[3]);
        let fc = tape.hadamard(f, c)?;
        let ig = tape.hadamard(i, g)?;
        c = tape.add(fc, ig)?;
        let tc = tape.tanh(c);
        h = tape.hadamard(o, tc)?;
    }
    Ok(h)
}

impl S3MModel {
    /// Records the biLSTM encoding of `ids`; the result has `2 * hidden` values.
    pub fn encode_on(&self, tape: &mut Tape, ids: &[u32]) -> Result<Var> {
        self.check_ids(ids)?;
        let rows = ids
            .iter()
            .map(|&id| tape.param_row(&self.store, self.params.embedding, id as usize))
            .collect::<Result<Vec<_>>>()?;
        let h = self.config.hidden_dim;
        let fwd = lstm(tape, &self.store, &self.params.forward, h, &rows)?;
        let reversed: Vec<Var> = rows.iter().rev().copied().collect();
        let bwd = lstm(tape, &self.store, &self.params.backward, h, &reversed)?;
        tape.concat(&[fwd, bwd])
    }

    pub fn features_on(&self, tape: &mut Tape, v1: Var, v2: Var) -> Result<Var> {
        features_on(tape, v1, v2)
    }

    pub fn similarity_on(&self, tape: &mut Tape, f: Var) -> Result<Var> {
        let w1 = tape.param(&self.store, self.params.w1);
        let b1 = tape.param(&self.store, self.params.b1);
        let w2 = tape.param(&self.store, self.params.w2);
        let b2 = tape.param(&self.store, self.params.b2);
        let z = tape.matvec(w1, f)?;
        let z = tape.add(z, b1)?;
        let hid = tape.relu(z);
        let s = tape.matvec(w2, hid)?;
        tape.add(s, b2)
    }

    pub fn score_encodings_on(&self, tape: &mut Tape, v1: Var, v2: Var) -> Result<Var> {
        let f = features_on(tape, v1, v2)?;
        self.similarity_on(tape, f)
    }

    pub fn score_pair_on(&self, tape: &mut Tape, ids1: &[u32], ids2: &[u32]) -> Result<Var> {
        let v1 = self.encode_on(tape, ids1)?;
        let v2 = self.encode_on(tape, ids2)?;
        self.score_encodings_on(tape, v1, v2)
    }
}

pub fn features_on(tape: &mut Tape, v1: Var, v2: Var) -> Result<Var> {
    let d = tape.sub(v1, v2)?;
    let ad = tape.abs(d);
    let s = tape.add(v1, v2)?;
    let mean = tape.scale(s, 0.5);
    let prod = tape.hadamard(v1, v2)?;
    tape.concat(&[ad, mean, prod])
}
