//! Model bundle files.
//!
//! Layout, all integers little endian:
//!
//! ```text
//! "S3M1" | header length: u32 | header: JSON | parameters: f64 ... | crc32: u32
//! ```
//!
//! The header carries the format version, model config, trim level,
//! `max_len`, the vocabulary tokens in id order (from id 2) and the name and
//! shape of every parameter. Parameter values follow in that order, row
//! major. The checksum covers every byte between the magic and itself.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use s3m_core::autodiff::{ParamStore, Tensor};
use s3m_core::model::parameter_layout;
use s3m_core::{ModelConfig, S3MModel, TrimLevel, Vocabulary};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"S3M1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub model: S3MModel,
    pub vocab: Vocabulary,
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub format_version: u32,
    pub model: ModelConfig,
    pub trim_level: TrimLevel,
    pub max_len: usize,
    pub vocabulary: Vec<String>,
    pub parameters: Vec<ParamEntry>,
}

impl Bundle {
    pub fn new(model: S3MModel, vocab: Vocabulary, max_len: usize) -> Result<Self> {
        if vocab.len() != model.config().vocab_size {
            return Err(Error::Bundle(format!(
                "vocabulary has {} ids, model embeds {}",
                vocab.len(),
                model.config().vocab_size
            )));
        }
        Ok(Bundle { model, vocab, max_len })
    }

    pub fn trim_level(&self) -> TrimLevel {
        self.vocab.trim_level()
    }

    pub fn header(&self) -> BundleHeader {
        BundleHeader {
            format_version: FORMAT_VERSION,
            model: *self.model.config(),
            trim_level: self.trim_level(),
            max_len: self.max_len,
            vocabulary: self.vocab.tokens().into_iter().map(String::from).collect(),
            parameters: self
                .model
                .store()
                .iter()
                .map(|(name, t)| ParamEntry {
                    name: name.to_string(),
                    shape: t.shape().dims(),
                })
                .collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let mut out = Vec::with_capacity(12 + header.len() + 8 * self.model.store().num_values());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in self.model.store().iter() {
            for v in t.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out[4..]);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < 12 {
            return Err(Error::Checksum { stored: 0, computed: crc32fast::hash(&bytes[4..]) });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = crc32fast::hash(&body[4..]);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let header_len = u32::from_le_bytes(body[4..8].try_into().unwrap()) as usize;
        let header_bytes = body
            .get(8..8 + header_len)
            .ok_or_else(|| Error::Bundle(format!("header length {header_len} runs past the end")))?;
        let header: BundleHeader = serde_json::from_slice(header_bytes)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: header.format_version,
                supported: FORMAT_VERSION,
            });
        }
        let layout = parameter_layout(&header.model);
        let expected: Vec<ParamEntry> = layout
            .iter()
            .map(|(n, s)| ParamEntry { name: n.clone(), shape: s.dims() })
            .collect();
        if header.parameters != expected {
            return Err(Error::Bundle("parameter table does not match the model config".into()));
        }
        let mut values = body[8 + header_len..].chunks_exact(8);
        let n_values: usize = layout.iter().map(|(_, s)| s.numel()).sum();
        if values.len() != n_values || !values.remainder().is_empty() {
            return Err(Error::Bundle(format!(
                "expected {} parameter values, found {} bytes",
                n_values,
                body.len() - 8 - header_len
            )));
        }
        let mut store = ParamStore::new();
        for (name, shape) in layout {
            let v: Vec<f64> = values
                .by_ref()
                .take(shape.numel())
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            store.add(name, Tensor::new(shape, v)?);
        }
        let model = S3MModel::from_store(header.model, store)?;
        let vocab = Vocabulary::from_tokens(header.vocabulary, header.trim_level)?;
        Bundle::new(model, vocab, header.max_len)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(Error::io(path))?;
        Self::from_bytes(&bytes)
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use s3m_core::{build_vocab, Dataset, StackTrace};

    fn bundle() -> Bundle {
        let ds = Dataset::new(vec![
            StackTrace::from_names(1, 1, 10, &["a.B.m", "a.B.n"]).unwrap(),
            StackTrace::from_names(2, 2, 20, &["c.D.m"]).unwrap(),
        ])
        .unwrap();
        let vocab = build_vocab(&ds, TrimLevel::CLASS).unwrap();
        let model = S3MModel::init(ModelConfig {
            embed_dim: 3,
            hidden_dim: 2,
            classifier_hidden: 4,
            vocab_size: vocab.len(),
            seed: 5,
        })
        .unwrap();
        Bundle::new(model, vocab, 17).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let b = bundle();
        let bytes = b.to_bytes();
        let back = Bundle::from_bytes(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.trim_level(), TrimLevel::CLASS);
        assert_eq!(back.max_len, 17);
    }

    #[test]
    fn truncation_and_corruption_fail_the_checksum() {
        let bytes = bundle().to_bytes();
        for cut in [bytes.len() - 1, bytes.len() - 9, 40, 12] {
            assert!(matches!(Bundle::from_bytes(&bytes[..cut]), Err(Error::Checksum { .. })), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[30] ^= 0x01;
        assert!(matches!(Bundle::from_bytes(&flipped), Err(Error::Checksum { .. })));
        assert!(matches!(Bundle::from_bytes(b"nope"), Err(Error::BadMagic)));
    }

    #[test]
    fn version_is_checked_after_checksum() {
        let b = bundle();
        let mut header = b.header();
        header.format_version = 9;
        let h = serde_json::to_vec(&header).unwrap();
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&(h.len() as u32).to_le_bytes());
        out.extend_from_slice(&h);
        for (_, t) in b.model.store().iter() {
            for v in t.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out[4..]);
        out.extend_from_slice(&crc.to_le_bytes());
        assert!(matches!(Bundle::from_bytes(&out), Err(Error::Version { found: 9, supported: 1 })));
    }

    #[test]
    fn header_lists_parameters_in_store_order() {
        let h = bundle().header();
        assert_eq!(h.parameters.len(), 21);
        assert_eq!(h.parameters[0].name, "embedding");
        assert_eq!(h.parameters[0].shape, vec![4, 3]);
        assert_eq!(h.parameters[20].name, "classifier.b2");
        assert_eq!(h.vocabulary, vec!["a.B", "c.D"]);
    }
}
