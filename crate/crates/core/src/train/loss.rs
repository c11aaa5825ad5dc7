use alloc::vec::Vec;

use crate::autodiff::{kernels, Tape, Var};
use crate::error::Result;

/// Pairwise RankNet loss with unit scale: `Σ_j ln(1 + e^(s_neg_j - s_pos))`.
pub fn ranknet_loss(s_pos: f64, s_negs: &[f64]) -> f64 {
    s_negs.iter().map(|&s| kernels::softplus(s - s_pos)).sum()
}

/// Recorded form of [`ranknet_loss`]; every input is a scalar variable.
pub fn ranknet_loss_on(tape: &mut Tape, s_pos: Var, s_negs: &[Var]) -> Result<Var> {
    let diffs = s_negs
        .iter()
        .map(|&s| tape.sub(s, s_pos))
        .collect::<Result<Vec<_>>>()?;
    let d = tape.concat(&diffs)?;
    let sp = tape.softplus(d);
    Ok(tape.sum(sp))
}
