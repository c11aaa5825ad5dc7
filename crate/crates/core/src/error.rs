use alloc::string::String;

use crate::autodiff::Shape;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left} vs {right}")]
    ShapeMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },
    #[error("backward requires a scalar loss, got shape {0}")]
    NotScalar(Shape),
    #[error("invalid frame {0:?}: frames must be non-empty dot-separated identifiers")]
    InvalidFrame(String),
    #[error("report {0} has no frames")]
    EmptyTrace(u64),
    #[error("duplicate report id {0}")]
    DuplicateReportId(u64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("trim level {0} out of range, valid range is 0..=3")]
    InvalidTrimLevel(u32),
    #[error("cannot encode an empty token sequence")]
    EmptySequence,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("{0} partition is empty")]
    EmptyPartition(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training data yields no (query, positive, negatives) groups")]
    NoTrainingGroups,
    #[error("non-finite loss {loss} in epoch {epoch} for query report {query_report_id}")]
    NonFiniteLoss {
        epoch: usize,
        query_report_id: u64,
        loss: f64,
    },
    #[error("no evaluable queries (every query's bucket lacks an earlier trace)")]
    NoEvaluableQueries,
    #[error("temporal leak: candidate report {candidate} is not strictly earlier than query {query}")]
    TemporalLeak { query: u64, candidate: u64 },
    #[error("model does not match data: {0}")]
    ModelMismatch(String),
}
