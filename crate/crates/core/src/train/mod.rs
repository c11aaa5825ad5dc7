//! End-to-end RankNet training with TF-IDF hard negatives.
//!
//! One group is one optimizer step. After every epoch the model is scored
//! on the validation window and the epoch with the best validation MRR is
//! kept. Resuming restores the weights but starts a fresh Adam state.

mod loss;
mod sampling;

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{clip_grad_norm, AdamConfig, Tape};
use crate::error::{Error, Result};
use crate::model::S3MModel;
use crate::retrieval::{evaluate_stream, EvalConfig, MetricsReport, NeuralMeasure, TfIdfMeasure};
use crate::split::Split;
use crate::trace::{Dataset, StackTrace, TrimLevel, DEFAULT_MAX_LEN};
use crate::vocab::{build_vocab, Vocabulary};

pub use loss::{ranknet_loss, ranknet_loss_on};
pub use sampling::{build_groups, GroupSources, NegativeSampler, TrainGroup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub trim_level: TrimLevel,
    pub max_len: usize,
    pub negatives_k: usize,
    pub candidate_pool: usize,
    /// Global gradient-norm cap; off by default.
    pub clip_norm: Option<f64>,
    pub eval: EvalConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            epochs: 10,
            seed: 0,
            trim_level: TrimLevel::FUNCTION,
            max_len: DEFAULT_MAX_LEN,
            negatives_k: 4,
            candidate_pool: 50,
            clip_norm: None,
            eval: EvalConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::InvalidConfig(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.epochs == 0 {
            return bad(format!("epochs must be at least 1"));
        }
        if self.negatives_k == 0 || self.candidate_pool == 0 {
            return bad(format!(
                "negatives_k and candidate_pool must be at least 1 (got {}, {})",
                self.negatives_k, self.candidate_pool
            ));
        }
        if self.max_len == 0 {
            return bad(format!("max_len must be at least 1"));
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return bad(format!("clip_norm must be positive"));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    /// `None` when the validation window has no evaluable query.
    pub val_mrr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Weights of the selected epoch.
    pub model: S3MModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub groups_per_epoch: usize,
    /// Loss of every optimizer step in order.
    pub step_losses: Vec<f64>,
}

/// Ranks each query against strictly older traces of `base` and earlier
/// queries with the neural measure.
pub fn evaluate_model(
    model: &S3MModel,
    vocab: &Vocabulary,
    max_len: usize,
    base: &[&StackTrace],
    queries: &[&StackTrace],
    config: &EvalConfig,
) -> Result<MetricsReport> {
    let mut m = NeuralMeasure::new(model, vocab, max_len)?;
    Ok(evaluate_stream(&mut m, base, queries, config)?.report)
}

/// MRR and RR@k with the training reports as queries (each against the
/// reports before it).
pub fn training_queries_report(
    model: &S3MModel,
    vocab: &Vocabulary,
    max_len: usize,
    train: &Dataset,
    config: &EvalConfig,
) -> Result<MetricsReport> {
    let queries: Vec<&StackTrace> = train.traces().iter().collect();
    evaluate_model(model, vocab, max_len, &[], &queries, config)
}

fn validation_mrr(model: &S3MModel, vocab: &Vocabulary, split: &Split, config: &TrainConfig) -> Result<Option<f64>> {
    if split.validation.is_empty() {
        return Ok(None);
    }
    let base: Vec<&StackTrace> = split.train.traces().iter().collect();
    let queries: Vec<&StackTrace> = split.validation.traces().iter().collect();
    match evaluate_model(model, vocab, config.max_len, &base, &queries, &config.eval) {
        Ok(r) => Ok(Some(r.mrr)),
        Err(Error::NoEvaluableQueries) => Ok(None),
        Err(e) => Err(e),
    }
}

fn check_compatible(model: &S3MModel, vocab: &Vocabulary, config: &TrainConfig) -> Result<()> {
    if vocab.trim_level() != config.trim_level {
        return Err(Error::ModelMismatch(format!(
            "vocabulary trim level {} differs from configured {}",
            vocab.trim_level(),
            config.trim_level
        )));
    }
    if vocab.len() != model.config().vocab_size {
        return Err(Error::ModelMismatch(format!(
            "vocabulary has {} ids but the model embeds {}",
            vocab.len(),
            model.config().vocab_size
        )));
    }
    Ok(())
}

/// Loss of one group, recorded on `tape`.
pub fn group_loss(model: &S3MModel, tape: &mut Tape, group: &TrainGroup) -> Result<crate::autodiff::Var> {
    let q = model.encode_on(tape, &group.query)?;
    let p = model.encode_on(tape, &group.positive)?;
    let s_pos = model.score_encodings_on(tape, q, p)?;
    let mut s_negs = Vec::with_capacity(group.negatives.len());
    for n in &group.negatives {
        let v = model.encode_on(tape, n)?;
        s_negs.push(model.score_encodings_on(tape, q, v)?);
    }
    ranknet_loss_on(tape, s_pos, &s_negs)
}

/// Trains `model` on `split.train`; `vocab` must come from the same train
/// window at `config.trim_level`.
pub fn train(model: S3MModel, vocab: &Vocabulary, split: &Split, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, vocab, split, config, |_, _| {})
}

/// [`train`] with a callback after every epoch, given the current weights.
pub fn train_with(
    mut model: S3MModel,
    vocab: &Vocabulary,
    split: &Split,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &S3MModel),
) -> Result<TrainOutcome> {
    config.validate()?;
    check_compatible(&model, vocab, config)?;
    let mut tfidf = TfIdfMeasure::frozen(split.train.traces(), config.trim_level);
    let sampler = NegativeSampler::new(
        &split.train,
        vocab,
        &mut tfidf,
        config.max_len,
        config.negatives_k,
        config.candidate_pool,
    )?;
    let adam = config.adam();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, S3MModel)> = None;
    let mut step_losses = Vec::new();

    for epoch in 1..=config.epochs {
        let mut groups = sampler.sample_epoch(&mut rng);
        groups.shuffle(&mut rng);
        let mut total = 0.0;
        for g in &groups {
            let mut tape = Tape::new();
            let loss = group_loss(&model, &mut tape, g)?;
            let value = tape.scalar(loss)?;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    query_report_id: g.sources.query_report,
                    loss: value,
                });
            }
            total += value;
            step_losses.push(value);
            tape.backward(loss, model.store_mut())?;
            if let Some(c) = config.clip_norm {
                clip_grad_norm(model.store_mut(), c);
            }
            adam.step(model.store_mut());
        }
        let val_mrr = validation_mrr(&model, vocab, split, config)?;
        let record = EpochRecord {
            epoch,
            mean_loss: total / groups.len() as f64,
            val_mrr,
        };
        on_epoch(&record, &model);
        history.push(record);
        let score = val_mrr.unwrap_or(f64::NEG_INFINITY);
        let improves = match &best {
            None => true,
            Some((b, _, _)) => score > *b || (val_mrr.is_none() && score == *b),
        };
        if improves {
            best = Some((score, epoch, model.clone()));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        groups_per_epoch: sampler.len(),
        step_losses,
    })
}

/// Continues training restored weights with a fresh optimizer state.
/// The vocabulary must equal the one rebuilt from `split.train`.
pub fn resume(
    mut model: S3MModel,
    vocab: &Vocabulary,
    split: &Split,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord, &S3MModel),
) -> Result<TrainOutcome> {
    check_compatible(&model, vocab, config)?;
    if *vocab != build_vocab(&split.train, config.trim_level)? {
        return Err(Error::ModelMismatch(format!(
            "checkpoint vocabulary does not match the training data at trim level {}",
            config.trim_level
        )));
    }
    model.store_mut().reset_optimizer();
    model.store_mut().zero_grad();
    train_with(model, vocab, split, config, on_epoch)
}

#[cfg(test)]
mod tests;
