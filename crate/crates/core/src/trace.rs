//! Crash reports, frame trimming and tokenization.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frames longer than this are cut when a trace is fed to a model.
pub const DEFAULT_MAX_LEN: usize = 100;

/// Number of trailing name segments dropped from every frame.
///
/// Level 0 keeps the full method name, 1 trims to the class, 2 to the
/// package, 3 one package segment further.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct TrimLevel(u8);

impl TrimLevel {
    pub const MAX: u32 = 3;
    pub const FUNCTION: TrimLevel = TrimLevel(0);
    pub const CLASS: TrimLevel = TrimLevel(1);
    pub const PACKAGE: TrimLevel = TrimLevel(2);

    pub fn new(level: u32) -> Result<Self> {
        if level > Self::MAX {
            return Err(Error::InvalidTrimLevel(level));
        }
        Ok(TrimLevel(level as u8))
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = TrimLevel> {
        (0..=Self::MAX as u8).map(TrimLevel)
    }
}

impl TryFrom<u32> for TrimLevel {
    type Error = Error;

    fn try_from(level: u32) -> Result<Self> {
        TrimLevel::new(level)
    }
}

impl From<TrimLevel> for u32 {
    fn from(level: TrimLevel) -> u32 {
        level.0 as u32
    }
}

impl fmt::Display for TrimLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One fully qualified method name, e.g. `org.foo.Bar.baz`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    raw: String,
}

impl Frame {
    /// Rejects empty names and names with empty segments (`a..b`, `.a`, `a.`).
    pub fn new(raw: impl Into<String>) -> Result<Self> {
        let raw = raw.into();
        if raw.is_empty() || raw.split('.').any(str::is_empty) {
            return Err(Error::InvalidFrame(raw));
        }
        Ok(Frame { raw })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> + '_ {
        self.raw.split('.')
    }

    pub fn segment_count(&self) -> usize {
        self.raw.bytes().filter(|&b| b == b'.').count() + 1
    }

    /// Borrowed form of [`trim_frame`]: trimming only ever yields a prefix.
    pub fn trimmed(&self, level: TrimLevel) -> &str {
        let drop = level.get();
        if drop == 0 {
            return &self.raw;
        }
        let keep = self.segment_count().saturating_sub(drop).max(1);
        match self.raw.match_indices('.').nth(keep - 1) {
            Some((idx, _)) => &self.raw[..idx],
            None => &self.raw,
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// Drops the last `level` segments of a frame, never going below one segment.
pub fn trim_frame(frame: &Frame, level: TrimLevel) -> String {
    frame.trimmed(level).to_string()
}

/// A crash report. `frames[0]` is the top of the stack (innermost call).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackTrace {
    pub report_id: u64,
    pub bucket_id: u64,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: u64,
    frames: Vec<Frame>,
}

impl StackTrace {
    pub fn new(report_id: u64, bucket_id: u64, timestamp: u64, frames: Vec<Frame>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyTrace(report_id));
        }
        Ok(StackTrace {
            report_id,
            bucket_id,
            timestamp,
            frames,
        })
    }

    /// Convenience constructor from raw frame names.
    pub fn from_names<S: AsRef<str>>(
        report_id: u64,
        bucket_id: u64,
        timestamp: u64,
        names: &[S],
    ) -> Result<Self> {
        let frames = names
            .iter()
            .map(|n| Frame::new(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(report_id, bucket_id, timestamp, frames)
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Trimmed tokens in stored order, cut to the first `max_len` frames.
    pub fn tokens(&self, level: TrimLevel, max_len: usize) -> impl Iterator<Item = &str> + '_ {
        self.frames.iter().take(max_len).map(move |f| f.trimmed(level))
    }

    /// Chronological sort key; ties on timestamp are broken by report id.
    pub fn order_key(&self) -> (u64, u64) {
        (self.timestamp, self.report_id)
    }
}

/// Trims every frame (top of stack first) and keeps at most `max_len` of them.
pub fn tokenize(trace: &StackTrace, level: TrimLevel, max_len: usize) -> Vec<String> {
    trace.tokens(level, max_len.max(1)).map(ToString::to_string).collect()
}

/// Reports sorted by `(timestamp, report_id)` together with their bucket map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    traces: Vec<StackTrace>,
    buckets: BTreeMap<u64, Vec<u64>>,
}

impl Dataset {
    pub fn new(mut traces: Vec<StackTrace>) -> Result<Self> {
        traces.sort_by_key(StackTrace::order_key);
        let mut seen = BTreeMap::new();
        for t in &traces {
            if seen.insert(t.report_id, ()).is_some() {
                return Err(Error::DuplicateReportId(t.report_id));
            }
        }
        let mut buckets: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for t in &traces {
            buckets.entry(t.bucket_id).or_default().push(t.report_id);
        }
        Ok(Dataset { traces, buckets })
    }

    pub fn traces(&self) -> &[StackTrace] {
        &self.traces
    }

    pub fn buckets(&self) -> &BTreeMap<u64, Vec<u64>> {
        &self.buckets
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn min_timestamp(&self) -> Option<u64> {
        self.traces.first().map(|t| t.timestamp)
    }

    pub fn max_timestamp(&self) -> Option<u64> {
        self.traces.last().map(|t| t.timestamp)
    }

    /// Mean number of reports per bucket.
    pub fn mean_bucket_size(&self) -> f64 {
        if self.buckets.is_empty() {
            0.0
        } else {
            self.traces.len() as f64 / self.buckets.len() as f64
        }
    }

    pub fn into_traces(self) -> Vec<StackTrace> {
        self.traces
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn frame(s: &str) -> Frame {
        Frame::new(s).unwrap()
    }

    fn lvl(l: u32) -> TrimLevel {
        TrimLevel::new(l).unwrap()
    }

    #[test]
    fn trims_to_package_level() {
        let f = frame("com.intellij.psi.impl.source.PsiFileImpl.getStubTree");
        assert_eq!(trim_frame(&f, lvl(2)), "com.intellij.psi.impl.source");
        assert_eq!(trim_frame(&f, lvl(1)), "com.intellij.psi.impl.source.PsiFileImpl");
        assert_eq!(trim_frame(&f, lvl(0)), f.raw());
    }

    #[test]
    fn trim_keeps_first_segment() {
        assert_eq!(trim_frame(&frame("a.b"), lvl(3)), "a");
        assert_eq!(trim_frame(&frame("a.b"), lvl(1)), "a");
        assert_eq!(trim_frame(&frame("native_frame"), lvl(3)), "native_frame");
    }

    #[test]
    fn rejects_bad_frames_and_levels() {
        assert!(Frame::new("").is_err());
        assert!(Frame::new("a..b").is_err());
        assert!(Frame::new(".a").is_err());
        assert!(Frame::new("a.").is_err());
        assert_eq!(TrimLevel::new(5), Err(Error::InvalidTrimLevel(5)));
        assert!(StackTrace::new(1, 1, 0, vec![]).is_err());
    }

    #[test]
    fn tokenize_trims_and_truncates() {
        let t = StackTrace::from_names(1, 1, 0, &["a.B.m", "a.B.n"]).unwrap();
        assert_eq!(tokenize(&t, lvl(1), 100), vec!["a.B", "a.B"]);
        assert_eq!(tokenize(&t, lvl(0), 100), vec!["a.B.m", "a.B.n"]);

        let names: Vec<String> = (0..150).map(|i| alloc::format!("p.C.m{i}")).collect();
        let long = StackTrace::from_names(2, 1, 0, &names).unwrap();
        let toks = tokenize(&long, lvl(0), 100);
        assert_eq!(toks.len(), 100);
        assert_eq!(toks[0], "p.C.m0");
        assert_eq!(toks[99], "p.C.m99");
    }

    #[test]
    fn dataset_sorts_and_indexes_buckets() {
        let a = StackTrace::from_names(1, 7, 200, &["a.b"]).unwrap();
        let b = StackTrace::from_names(2, 7, 100, &["a.c"]).unwrap();
        let c = StackTrace::from_names(3, 9, 100, &["a.d"]).unwrap();
        let ds = Dataset::new(vec![a, b, c]).unwrap();
        let ts: Vec<_> = ds.traces().iter().map(|t| (t.timestamp, t.report_id)).collect();
        assert_eq!(ts, vec![(100, 2), (100, 3), (200, 1)]);
        assert_eq!(ds.buckets()[&7], vec![2, 1]);
        assert_eq!(ds.buckets()[&9], vec![3]);

        let dup = StackTrace::from_names(1, 1, 0, &["x"]).unwrap();
        assert_eq!(
            Dataset::new(vec![dup.clone(), dup]),
            Err(Error::DuplicateReportId(1))
        );
    }

    fn frame_strategy() -> impl Strategy<Value = Frame> {
        prop::collection::vec("[a-zA-Z_$][a-zA-Z0-9_$<>]{0,6}", 1..8)
            .prop_map(|segs| Frame::new(segs.join(".")).unwrap())
    }

    proptest! {
        #[test]
        fn segments_join_back_to_raw(f in frame_strategy()) {
            let joined: Vec<&str> = f.segments().collect();
            prop_assert_eq!(joined.join("."), f.raw());
            prop_assert_eq!(joined.len(), f.segment_count());
        }

        #[test]
        fn trimming_is_monotone(f in frame_strategy()) {
            for l in 1..=3u32 {
                let coarse = trim_frame(&f, lvl(l));
                let fine = trim_frame(&f, lvl(l - 1));
                prop_assert!(!coarse.is_empty());
                prop_assert!(fine.starts_with(&coarse));
                if coarse.len() < fine.len() {
                    prop_assert_eq!(fine.as_bytes()[coarse.len()], b'.');
                }
                let expected = f.segment_count().saturating_sub(l as usize).max(1);
                prop_assert_eq!(coarse.split('.').count(), expected);
            }
        }
    }
}
