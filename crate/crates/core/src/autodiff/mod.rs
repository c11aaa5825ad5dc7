//! Dense reverse-mode differentiation over rank-1 and rank-2 `f64` tensors.
//!
//! Forward values are computed eagerly while a [`Tape`] records each
//! operation. [`Tape::backward`] walks the record in reverse and accumulates
//! gradients into the [`ParamStore`] that supplied the parameters. A tape is
//! built per training example and thrown away afterwards.

mod gradcheck;
pub mod kernels;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{gradcheck, gradcheck_with_analytic, Coordinate, GradcheckOptions, GradcheckReport};
pub use params::{adam_step, clip_grad_norm, AdamConfig, ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::{Shape, Tensor};
