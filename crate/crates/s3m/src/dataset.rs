//! JSON-lines report files.
//!
//! One record per line:
//! `{"report_id":1,"bucket_id":7,"timestamp":100,"frames":["a.b.C.m"]}`
//! with frames top of stack first and the timestamp in Unix seconds.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use s3m_core::{Dataset, StackTrace};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub report_id: u64,
    pub bucket_id: u64,
    pub timestamp: u64,
    pub frames: Vec<String>,
}

impl ReportRecord {
    pub fn from_trace(t: &StackTrace) -> Self {
        ReportRecord {
            report_id: t.report_id,
            bucket_id: t.bucket_id,
            timestamp: t.timestamp,
            frames: t.frames().iter().map(|f| f.raw().to_string()).collect(),
        }
    }

    pub fn into_trace(self) -> s3m_core::Result<StackTrace> {
        StackTrace::from_names(self.report_id, self.bucket_id, self.timestamp, &self.frames)
    }
}

/// Only JSON lines is supported; the enum keeps `--format` explicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    #[default]
    Jsonl,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub valid: usize,
    pub malformed: usize,
    /// Up to [`MAX_REPORTED`] `(line number, reason)` pairs.
    pub first_errors: Vec<(usize, String)>,
}

pub const MAX_REPORTED: usize = 10;

impl ParseStats {
    fn reject(&mut self, line: usize, reason: String) {
        self.malformed += 1;
        if self.first_errors.len() < MAX_REPORTED {
            self.first_errors.push((line, reason));
        }
    }
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub stats: ParseStats,
}

/// Parses JSON lines from any reader. Blank lines are ignored; malformed
/// records and repeated report ids are skipped and counted.
pub fn read_dataset(reader: impl BufRead, origin: &Path) -> Result<Loaded> {
    let mut stats = ParseStats::default();
    let mut seen = BTreeSet::new();
    let mut traces = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(Error::io(origin))?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: ReportRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                stats.reject(lineno, e.to_string());
                continue;
            }
        };
        if !seen.insert(record.report_id) {
            stats.reject(lineno, format!("duplicate report_id {}", record.report_id));
            continue;
        }
        match record.into_trace() {
            Ok(t) => traces.push(t),
            Err(e) => stats.reject(lineno, e.to_string()),
        }
    }
    stats.valid = traces.len();
    if traces.is_empty() {
        return Err(Error::NoValidRecords {
            path: origin.to_path_buf(),
            malformed: stats.malformed,
        });
    }
    Ok(Loaded {
        dataset: Dataset::new(traces)?,
        stats,
    })
}

pub fn parse_dataset(path: &Path, format: DatasetFormat) -> Result<Loaded> {
    match format {
        DatasetFormat::Jsonl => {
            let f = File::open(path).map_err(Error::io(path))?;
            read_dataset(BufReader::new(f), path)
        }
    }
}

pub fn write_traces<'a>(w: &mut impl Write, traces: impl IntoIterator<Item = &'a StackTrace>) -> std::io::Result<()> {
    for t in traces {
        serde_json::to_writer(&mut *w, &ReportRecord::from_trace(t))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_dataset<'a>(path: &Path, traces: impl IntoIterator<Item = &'a StackTrace>) -> Result<()> {
    let f = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(f);
    write_traces(&mut w, traces)
        .and_then(|_| w.flush())
        .map_err(Error::io(path))
}
