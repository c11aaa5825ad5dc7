//! TF-IDF over trimmed frames: weight `(1 + ln tf) * ln(1 + N / df)`,
//! cosine similarity. Terms missing from the index count as `df = 1`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::SimilarityMeasure;
use crate::error::Result;
use crate::trace::{StackTrace, TrimLevel};

/// Document frequencies of trimmed frames over a set of traces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TfIdfIndex {
    trim_level: TrimLevel,
    n_docs: usize,
    df: BTreeMap<String, usize>,
}

pub fn build_tfidf_index<'a>(
    history: impl IntoIterator<Item = &'a StackTrace>,
    trim_level: TrimLevel,
) -> TfIdfIndex {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut n_docs = 0;
    for t in history {
        n_docs += 1;
        for term in term_counts(t, trim_level).into_keys() {
            *df.entry(String::from(term)).or_default() += 1;
        }
    }
    TfIdfIndex {
        trim_level,
        n_docs,
        df,
    }
}

fn term_counts(t: &StackTrace, level: TrimLevel) -> BTreeMap<&str, u32> {
    let mut tf = BTreeMap::new();
    for f in t.frames() {
        *tf.entry(f.trimmed(level)).or_default() += 1;
    }
    tf
}

fn idf_of(n_docs: usize, df: usize) -> f64 {
    libm::log(1.0 + n_docs as f64 / df.max(1) as f64)
}

fn tf_weight(tf: u32) -> f64 {
    1.0 + libm::log(tf as f64)
}

fn cosine(dot: f64, na: f64, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (libm::sqrt(na) * libm::sqrt(nb))
    }
}

impl TfIdfIndex {
    pub fn trim_level(&self) -> TrimLevel {
        self.trim_level
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf_of(self.n_docs, self.df(term))
    }
}

/// Cosine of the TF-IDF vectors of `a` and `b` under `index`.
pub fn tfidf_score(a: &StackTrace, b: &StackTrace, index: &TfIdfIndex) -> f64 {
    fn weigh<'t>(t: &'t StackTrace, index: &TfIdfIndex) -> BTreeMap<&'t str, f64> {
        term_counts(t, index.trim_level)
            .into_iter()
            .map(|(term, tf)| (term, tf_weight(tf) * index.idf(term)))
            .collect()
    }
    let (wa, wb) = (weigh(a, index), weigh(b, index));
    let dot: f64 = wa
        .iter()
        .filter_map(|(t, x)| wb.get(t).map(|y| x * y))
        .sum();
    let na: f64 = wa.values().map(|x| x * x).sum();
    let nb: f64 = wb.values().map(|x| x * x).sum();
    cosine(dot, na, nb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum IdfMode {
    /// Document frequencies fixed at construction.
    Frozen,
    /// Document frequencies recomputed over each query's history.
    Streaming,
}

/// Interned, cached form of [`tfidf_score`] for scoring many pairs.
///
/// Term lists are cached per report id, so report ids must be unique
/// among the traces it sees.
#[derive(Debug, Clone)]
pub struct TfIdfMeasure {
    trim_level: TrimLevel,
    mode: IdfMode,
    terms: BTreeMap<String, u32>,
    docs: BTreeMap<u64, Vec<(u32, f64)>>,
    df: Vec<usize>,
    n_docs: usize,
    idf: Vec<f64>,
}

impl TfIdfMeasure {
    /// Index rebuilt over the candidate history of every query.
    pub fn streaming(trim_level: TrimLevel) -> Self {
        TfIdfMeasure {
            trim_level,
            mode: IdfMode::Streaming,
            terms: BTreeMap::new(),
            docs: BTreeMap::new(),
            df: Vec::new(),
            n_docs: 0,
            idf: Vec::new(),
        }
    }

    /// Index frozen over `corpus`.
    pub fn frozen<'a>(corpus: impl IntoIterator<Item = &'a StackTrace>, trim_level: TrimLevel) -> Self {
        let mut m = Self::streaming(trim_level);
        m.mode = IdfMode::Frozen;
        let corpus: Vec<&StackTrace> = corpus.into_iter().collect();
        m.recount(&corpus);
        m
    }

    fn intern(&mut self, t: &StackTrace) {
        if self.docs.contains_key(&t.report_id) {
            return;
        }
        let mut entry: Vec<(u32, f64)> = Vec::new();
        for (term, tf) in term_counts(t, self.trim_level) {
            let next = self.terms.len() as u32;
            let id = *self.terms.entry(String::from(term)).or_insert(next);
            entry.push((id, tf_weight(tf)));
        }
        entry.sort_unstable_by_key(|&(id, _)| id);
        self.docs.insert(t.report_id, entry);
    }

    fn recount(&mut self, corpus: &[&StackTrace]) {
        for t in corpus {
            self.intern(t);
        }
        self.df.clear();
        self.df.resize(self.terms.len(), 0);
        for t in corpus {
            for &(id, _) in &self.docs[&t.report_id] {
                self.df[id as usize] += 1;
            }
        }
        self.n_docs = corpus.len();
        self.refresh_idf();
    }

    fn refresh_idf(&mut self) {
        self.df.resize(self.terms.len(), 0);
        let n = self.n_docs;
        self.idf = self.df.iter().map(|&d| idf_of(n, d)).collect();
    }

    fn weighted(&self, doc: &[(u32, f64)]) -> f64 {
        doc.iter()
            .map(|&(id, w)| {
                let x = w * self.idf[id as usize];
                x * x
            })
            .sum()
    }

    fn score_docs(&self, a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
        let (mut i, mut j, mut dot) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            let (ta, wa) = a[i];
            let (tb, wb) = b[j];
            match ta.cmp(&tb) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    let idf = self.idf[ta as usize];
                    dot += (wa * idf) * (wb * idf);
                    i += 1;
                    j += 1;
                }
            }
        }
        cosine(dot, self.weighted(a), self.weighted(b))
    }

    /// Same value as `tfidf_score` against this measure's current counts.
    pub fn index_snapshot(&self) -> TfIdfIndex {
        let mut df = BTreeMap::new();
        for (term, &id) in &self.terms {
            if self.df[id as usize] > 0 {
                df.insert(term.clone(), self.df[id as usize]);
            }
        }
        TfIdfIndex {
            trim_level: self.trim_level,
            n_docs: self.n_docs,
            df,
        }
    }
}

impl SimilarityMeasure for TfIdfMeasure {
    fn name(&self) -> &str {
        "Lerch and Mezini"
    }

    fn prepare(&mut self, query: &StackTrace, history: &[&StackTrace]) -> Result<()> {
        match self.mode {
            IdfMode::Streaming => {
                self.intern(query);
                self.recount(history);
            }
            IdfMode::Frozen => {
                let before = self.terms.len();
                self.intern(query);
                for t in history {
                    self.intern(t);
                }
                if self.terms.len() != before {
                    self.refresh_idf();
                }
            }
        }
        Ok(())
    }

    fn score(&self, query: &StackTrace, candidate: &StackTrace) -> f64 {
        match (self.docs.get(&query.report_id), self.docs.get(&candidate.report_id)) {
            (Some(a), Some(b)) => self.score_docs(a, b),
            _ => tfidf_score(query, candidate, &self.index_snapshot()),
        }
    }
}
