//! Time-aware train/validation/test partitioning.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::trace::{Dataset, StackTrace};

pub const SECONDS_PER_DAY: u64 = 86_400;

/// Three chronologically ordered partitions of a report stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    /// Start of validation and start of test (half-open intervals).
    pub boundaries: [u64; 2],
    /// `[start, end)` of the whole window.
    pub window: (u64, u64),
    /// Traces outside the window.
    pub dropped: usize,
}

impl Split {
    /// Assembles a split from ready-made partitions, checking that every
    /// train timestamp precedes every validation timestamp, which in turn
    /// precede every test timestamp. Validation may be empty.
    pub fn from_partitions(train: Dataset, validation: Dataset, test: Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyPartition("train"));
        }
        if test.is_empty() {
            return Err(Error::EmptyPartition("test"));
        }
        let ordered = |a: &Dataset, b: &Dataset| match (a.max_timestamp(), b.min_timestamp()) {
            (Some(x), Some(y)) => x < y,
            _ => true,
        };
        if !ordered(&train, &validation) || !ordered(&validation, &test) || !ordered(&train, &test) {
            return Err(Error::InvalidSplit(format!(
                "partitions overlap in time (train ends {:?}, validation {:?}..{:?}, test starts {:?})",
                train.max_timestamp(),
                validation.min_timestamp(),
                validation.max_timestamp(),
                test.min_timestamp()
            )));
        }
        let start = train.min_timestamp().unwrap_or(0);
        let val_start = validation
            .min_timestamp()
            .unwrap_or_else(|| train.max_timestamp().unwrap_or(0) + 1);
        let test_start = test.min_timestamp().unwrap_or(0);
        let end = test.max_timestamp().unwrap_or(0) + 1;
        Ok(Split {
            train,
            validation,
            test,
            boundaries: [val_start, test_start],
            window: (start, end),
            dropped: 0,
        })
    }

    /// Train followed by validation traces, chronological.
    pub fn train_and_validation(&self) -> impl Iterator<Item = &StackTrace> {
        self.train.traces().iter().chain(self.validation.traces())
    }
}

/// Assigns traces to `[start, start+train)`, `[.., +val)`, `[.., +test)`
/// (durations in days). A trace on a boundary belongs to the later
/// partition; traces outside the window are dropped and counted.
pub fn time_split(
    ds: &Dataset,
    train_days: u64,
    val_days: u64,
    test_days: u64,
    start: u64,
) -> Result<Split> {
    if train_days == 0 || val_days == 0 || test_days == 0 {
        return Err(Error::InvalidSplit(format!(
            "durations must be at least one day (got {train_days}/{val_days}/{test_days})"
        )));
    }
    let max_ts = ds.max_timestamp().ok_or(Error::EmptyDataset)?;
    if start > max_ts {
        return Err(Error::InvalidSplit(format!(
            "window start {start} is after the last report ({max_ts})"
        )));
    }
    let overflow = || Error::InvalidSplit(format!("window overflows from start {start}"));
    let days = |d: u64| d.checked_mul(SECONDS_PER_DAY).ok_or_else(overflow);
    let val_start = start.checked_add(days(train_days)?).ok_or_else(overflow)?;
    let test_start = val_start.checked_add(days(val_days)?).ok_or_else(overflow)?;
    let end = test_start.checked_add(days(test_days)?).ok_or_else(overflow)?;

    let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
    let mut dropped = 0;
    for t in ds.traces() {
        let ts = t.timestamp;
        if ts < start || ts >= end {
            dropped += 1;
        } else if ts < val_start {
            train.push(t.clone());
        } else if ts < test_start {
            validation.push(t.clone());
        } else {
            test.push(t.clone());
        }
    }
    if train.is_empty() {
        return Err(Error::EmptyPartition("train"));
    }
    if test.is_empty() {
        return Err(Error::EmptyPartition("test"));
    }
    Ok(Split {
        train: Dataset::new(train)?,
        validation: Dataset::new(validation)?,
        test: Dataset::new(test)?,
        boundaries: [val_start, test_start],
        window: (start, end),
        dropped,
    })
}
