//! The siamese scorer: token embedding, bidirectional LSTM encoder,
//! symmetric pair features and a two-layer ReLU head.
//!
//! Every operation exists twice: once on a [`Tape`](crate::autodiff::Tape)
//! for training ([`graph`]) and once as plain slice arithmetic for inference
//! ([`forward`]). Both call the same kernels in the same order, so their
//! values agree bit for bit.
//!
//! The encoder reads a trace in stored order (top of stack first) with the
//! forward LSTM and in reverse with the backward LSTM. The encoding is the
//! forward LSTM's final hidden state followed by the backward LSTM's final
//! hidden state. Each gate matrix multiplies `[embedding ‖ previous hidden]`.

pub mod forward;
pub mod graph;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Shape, Tensor};
use crate::error::{Error, Result};

pub use forward::{features, head_score, Encoding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub classifier_hidden: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, seed: u64) -> Self {
        ModelConfig {
            embed_dim: 50,
            hidden_dim: 100,
            classifier_hidden: 200,
            vocab_size,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.classifier_hidden == 0 {
            return Err(Error::InvalidConfig(format!(
                "model dimensions must be positive (embed {}, hidden {}, classifier {})",
                self.embed_dim, self.hidden_dim, self.classifier_hidden
            )));
        }
        if self.vocab_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "vocab_size must be at least 2, got {}",
                self.vocab_size
            )));
        }
        Ok(())
    }

    pub fn encoding_dim(&self) -> usize {
        2 * self.hidden_dim
    }

    pub fn feature_dim(&self) -> usize {
        6 * self.hidden_dim
    }
}

/// Gate weights `[hidden x (embed + hidden)]` and biases `[hidden]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    pub w_input: ParamId,
    pub w_forget: ParamId,
    pub w_output: ParamId,
    pub w_candidate: ParamId,
    pub b_input: ParamId,
    pub b_forget: ParamId,
    pub b_output: ParamId,
    pub b_candidate: ParamId,
}

/// Where each named weight lives in the model's [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct S3MParams {
    pub embedding: ParamId,
    pub forward: LstmParams,
    pub backward: LstmParams,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

const GATES: [&str; 4] = ["input", "forget", "output", "candidate"];

/// Parameter names and shapes in serialization order.
pub fn parameter_layout(cfg: &ModelConfig) -> Vec<(String, Shape)> {
    let (e, h, k) = (cfg.embed_dim, cfg.hidden_dim, cfg.classifier_hidden);
    let mut out = Vec::with_capacity(21);
    out.push((String::from("embedding"), Shape::Matrix(cfg.vocab_size, e)));
    for dir in ["lstm_fwd", "lstm_bwd"] {
        for g in GATES {
            out.push((format!("{dir}.w_{g}"), Shape::Matrix(h, e + h)));
        }
        for g in GATES {
            out.push((format!("{dir}.b_{g}"), Shape::Vector(h)));
        }
    }
    out.push((String::from("classifier.w1"), Shape::Matrix(k, 6 * h)));
    out.push((String::from("classifier.b1"), Shape::Vector(k)));
    out.push((String::from("classifier.w2"), Shape::Matrix(1, k)));
    out.push((String::from("classifier.b2"), Shape::Vector(1)));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct S3MModel {
    config: ModelConfig,
    store: ParamStore,
    params: S3MParams,
}

impl S3MModel {
    /// Draws every value from `U(-1/sqrt(hidden), 1/sqrt(hidden))`, in
    /// parameter order, from a generator seeded with `config.seed`.
    pub fn init(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let bound = 1.0 / libm::sqrt(config.hidden_dim as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        for (name, shape) in parameter_layout(&config) {
            let values = (0..shape.numel()).map(|_| rng.gen_range(-bound..bound)).collect();
            store.add(name, Tensor::new(shape, values)?);
        }
        Self::from_store(config, store)
    }

    /// Wraps an existing store; names and shapes must match the layout.
    pub fn from_store(config: ModelConfig, store: ParamStore) -> Result<Self> {
        config.validate()?;
        let layout = parameter_layout(&config);
        if layout.len() != store.len() {
            return Err(Error::ModelMismatch(format!(
                "expected {} parameters, found {}",
                layout.len(),
                store.len()
            )));
        }
        for ((name, shape), id) in layout.iter().zip(store.ids()) {
            let t = store.get(id);
            if store.name(id) != name || t.shape() != *shape {
                return Err(Error::ModelMismatch(format!(
                    "parameter {} {} does not match expected {} {}",
                    store.name(id),
                    t.shape(),
                    name,
                    shape
                )));
            }
        }
        let id = |i: usize| store.ids().nth(i).expect("layout checked");
        let lstm = |base: usize| LstmParams {
            w_input: id(base),
            w_forget: id(base + 1),
            w_output: id(base + 2),
            w_candidate: id(base + 3),
            b_input: id(base + 4),
            b_forget: id(base + 5),
            b_output: id(base + 6),
            b_candidate: id(base + 7),
        };
        let params = S3MParams {
            embedding: id(0),
            forward: lstm(1),
            backward: lstm(9),
            w1: id(17),
            b1: id(18),
            w2: id(19),
            b2: id(20),
        };
        Ok(S3MModel {
            config,
            store,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &S3MParams {
        &self.params
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn all_finite(&self) -> bool {
        self.store.iter().all(|(_, t)| t.values().iter().all(|v| v.is_finite()))
    }

    pub(crate) fn check_ids(&self, ids: &[u32]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::EmptySequence);
        }
        if let Some(&bad) = ids.iter().find(|&&i| i as usize >= self.config.vocab_size) {
            return Err(Error::ModelMismatch(format!(
                "token id {bad} outside vocabulary of size {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
