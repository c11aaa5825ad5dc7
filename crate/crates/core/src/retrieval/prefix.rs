use super::SimilarityMeasure;
use crate::trace::{StackTrace, TrimLevel};

/// Longest common prefix of the trimmed frame sequences over the longer
/// trace's length, in `[0, 1]`.
pub fn prefix_match(a: &StackTrace, b: &StackTrace, trim_level: TrimLevel) -> f64 {
    let (fa, fb) = (a.frames(), b.frames());
    let common = fa
        .iter()
        .zip(fb)
        .take_while(|(x, y)| x.trimmed(trim_level) == y.trimmed(trim_level))
        .count();
    common as f64 / fa.len().max(fb.len()) as f64
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PrefixMatch {
    pub trim_level: TrimLevel,
}

impl SimilarityMeasure for PrefixMatch {
    fn name(&self) -> &str {
        "Prefix Match"
    }

    fn score(&self, query: &StackTrace, candidate: &StackTrace) -> f64 {
        prefix_match(query, candidate, self.trim_level)
    }
}
