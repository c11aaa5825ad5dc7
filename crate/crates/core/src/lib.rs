//! Siamese stack trace similarity.
//!
//! A bidirectional LSTM encodes each (trimmed, tokenized) stack trace into a
//! fixed-width vector; a symmetric feature vector built from two encodings is
//! scored by a small ReLU network. The crate also carries everything needed to
//! train that scorer end to end (a reverse-mode tape, Adam, RankNet with
//! TF-IDF hard negatives) and to evaluate it under a time-aware retrieval
//! protocol against the prefix-match and TF-IDF baselines.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, dataset IO and
//! the command line live in the `s3m` companion crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod error;
pub mod model;
pub mod retrieval;
pub mod split;
pub mod trace;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};
pub use model::{ModelConfig, S3MModel};
pub use split::{time_split, Split};
pub use trace::{tokenize, trim_frame, Dataset, Frame, StackTrace, TrimLevel};
pub use vocab::{build_vocab, Vocabulary};
