//! Token dictionary over trimmed frames.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::trace::{Dataset, StackTrace, TrimLevel};

pub const PAD_ID: u32 = 0;
pub const OOV_ID: u32 = 1;
const FIRST_TOKEN_ID: u32 = 2;

/// Maps trimmed tokens to contiguous ids. Ids 0 and 1 are reserved for
/// padding and out-of-vocabulary tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: BTreeMap<String, u32>,
    trim_level: TrimLevel,
}

impl Vocabulary {
    /// Builds a vocabulary from an explicit token list; ids follow list
    /// order starting at 2. Duplicates are rejected.
    pub fn from_tokens(tokens: Vec<String>, trim_level: TrimLevel) -> Result<Self> {
        let mut token_to_id = BTreeMap::new();
        for (i, tok) in tokens.into_iter().enumerate() {
            let id = FIRST_TOKEN_ID + i as u32;
            if let Some(prev) = token_to_id.insert(tok, id) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "duplicate vocabulary token (ids {prev} and {id})"
                )));
            }
        }
        Ok(Vocabulary {
            token_to_id,
            trim_level,
        })
    }

    pub fn trim_level(&self) -> TrimLevel {
        self.trim_level
    }

    /// Vocabulary size including the two reserved ids.
    pub fn len(&self) -> usize {
        self.token_to_id.len() + FIRST_TOKEN_ID as usize
    }

    pub fn is_empty(&self) -> bool {
        self.token_to_id.is_empty()
    }

    pub fn lookup(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(OOV_ID)
    }

    /// Tokens in id order (ids 2, 3, ...).
    pub fn tokens(&self) -> Vec<&str> {
        let mut out: Vec<(&str, u32)> = self
            .token_to_id
            .iter()
            .map(|(t, &id)| (t.as_str(), id))
            .collect();
        out.sort_by_key(|&(_, id)| id);
        out.into_iter().map(|(t, _)| t).collect()
    }

    /// Elementwise lookup with OOV fallback.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<u32>> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(tokens.iter().map(|t| self.lookup(t.as_ref())).collect())
    }

    /// Tokenizes at this vocabulary's trim level and encodes in one pass.
    pub fn encode_trace(&self, trace: &StackTrace, max_len: usize) -> Vec<u32> {
        trace
            .tokens(self.trim_level, max_len.max(1))
            .map(|t| self.lookup(t))
            .collect()
    }
}

/// Collects every distinct trimmed token of `train`; ids are assigned in
/// lexicographic token order so the result is reproducible.
pub fn build_vocab(train: &Dataset, level: TrimLevel) -> Result<Vocabulary> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut token_to_id: BTreeMap<String, u32> = BTreeMap::new();
    for trace in train.traces() {
        for frame in trace.frames() {
            let tok = frame.trimmed(level);
            if !token_to_id.contains_key(tok) {
                token_to_id.insert(String::from(tok), 0);
            }
        }
    }
    for (i, id) in token_to_id.values_mut().enumerate() {
        *id = FIRST_TOKEN_ID + i as u32;
    }
    Ok(Vocabulary {
        token_to_id,
        trim_level: level,
    })
}
