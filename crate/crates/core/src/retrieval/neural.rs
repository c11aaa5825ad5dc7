use alloc::collections::BTreeMap;
use alloc::format;

use super::SimilarityMeasure;
use crate::error::{Error, Result};
use crate::model::{Encoding, S3MModel};
use crate::trace::StackTrace;
use crate::vocab::Vocabulary;

/// The trained scorer as a retrieval measure.
///
/// Each trace is encoded once and its encoding reused across every pair it
/// takes part in; only the classifier head runs per pair.
#[derive(Debug)]
pub struct NeuralMeasure<'m> {
    model: &'m S3MModel,
    vocab: &'m Vocabulary,
    max_len: usize,
    cache: Option<BTreeMap<u64, Encoding>>,
}

impl<'m> NeuralMeasure<'m> {
    pub fn new(model: &'m S3MModel, vocab: &'m Vocabulary, max_len: usize) -> Result<Self> {
        if vocab.len() != model.config().vocab_size {
            return Err(Error::ModelMismatch(format!(
                "vocabulary has {} ids but the model embeds {}",
                vocab.len(),
                model.config().vocab_size
            )));
        }
        Ok(NeuralMeasure {
            model,
            vocab,
            max_len,
            cache: Some(BTreeMap::new()),
        })
    }

    /// Recomputes both encodings for every pair.
    pub fn without_cache(mut self) -> Self {
        self.cache = None;
        self
    }

    fn encode(&self, t: &StackTrace) -> Result<Encoding> {
        self.model.encode(&self.vocab.encode_trace(t, self.max_len))
    }
}

impl SimilarityMeasure for NeuralMeasure<'_> {
    fn name(&self) -> &str {
        "S3M"
    }

    fn prepare(&mut self, query: &StackTrace, history: &[&StackTrace]) -> Result<()> {
        let Some(cache) = &self.cache else {
            return Ok(());
        };
        let missing: alloc::vec::Vec<&StackTrace> = core::iter::once(query)
            .chain(history.iter().copied())
            .filter(|t| !cache.contains_key(&t.report_id))
            .collect();
        for t in missing {
            let e = self.encode(t)?;
            if let Some(c) = &mut self.cache {
                c.insert(t.report_id, e);
            }
        }
        Ok(())
    }

    fn score(&self, query: &StackTrace, candidate: &StackTrace) -> f64 {
        let cached = self
            .cache
            .as_ref()
            .and_then(|c| Some((c.get(&query.report_id)?, c.get(&candidate.report_id)?)));
        let result = match cached {
            Some((a, b)) => self.model.score_encodings(a, b),
            None => self.encode(query).and_then(|a| {
                let b = self.encode(candidate)?;
                self.model.score_encodings(&a, &b)
            }),
        };
        result.unwrap_or(f64::NAN)
    }
}
