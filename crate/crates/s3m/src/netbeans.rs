//! Converts exported bug-tracker crash reports into the JSON-lines format.
//!
//! The input is a JSON array of report objects or one object per line.
//! Field names are configurable. A report whose duplicate key is null,
//! missing or equal to its own id starts a bucket; otherwise it joins the
//! bucket of the report it points to, following chains of duplicates to
//! their root. Frames may be strings, objects carrying the name under
//! [`ConvertOptions::frame_name_key`], or a list of such lists (one per
//! chained exception), in which case only the first is kept.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::ReportRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Seconds,
    #[default]
    Millis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvertOptions {
    pub id_key: String,
    pub duplicate_key: String,
    pub timestamp_key: String,
    pub timestamp_unit: TimeUnit,
    pub frames_key: String,
    pub frame_name_key: String,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        ConvertOptions {
            id_key: "id".into(),
            duplicate_key: "dup_id".into(),
            timestamp_key: "timestamp".into(),
            timestamp_unit: TimeUnit::Millis,
            frames_key: "elements".into(),
            frame_name_key: "name".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConvertStats {
    pub converted: usize,
    pub skipped: usize,
    /// Duplicate links to ids absent from the input; such reports start
    /// their own bucket.
    pub dangling_links: usize,
    pub first_errors: Vec<String>,
}

fn parse_documents(text: &str) -> Result<Vec<Value>> {
    if text.trim_start().starts_with('[') {
        match serde_json::from_str(text)? {
            Value::Array(v) => Ok(v),
            _ => unreachable!(),
        }
    } else {
        Ok(text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).unwrap_or(Value::Null))
            .collect())
    }
}

fn as_u64(v: &Value) -> Option<u64> {
    match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn frames_of(v: &Value, name_key: &str) -> Option<Vec<String>> {
    let arr = v.as_array()?;
    if let Some(Value::Array(_)) = arr.first() {
        return frames_of(&arr[0], name_key);
    }
    arr.iter()
        .map(|f| match f {
            Value::String(s) => Some(s.clone()),
            Value::Object(o) => o.get(name_key)?.as_str().map(String::from),
            _ => None,
        })
        .collect()
}

struct Raw {
    id: u64,
    dup: Option<u64>,
    timestamp: u64,
    frames: Vec<String>,
}

fn extract(doc: &Value, o: &ConvertOptions) -> std::result::Result<Raw, String> {
    let id = doc.get(&o.id_key).and_then(as_u64).ok_or_else(|| format!("missing or invalid `{}`", o.id_key))?;
    let ts = doc
        .get(&o.timestamp_key)
        .and_then(as_u64)
        .ok_or_else(|| format!("report {id}: missing or invalid `{}`", o.timestamp_key))?;
    let timestamp = match o.timestamp_unit {
        TimeUnit::Seconds => ts,
        TimeUnit::Millis => ts / 1000,
    };
    let frames = doc
        .get(&o.frames_key)
        .and_then(|f| frames_of(f, &o.frame_name_key))
        .filter(|f| !f.is_empty())
        .ok_or_else(|| format!("report {id}: missing or empty `{}`", o.frames_key))?;
    let dup = doc.get(&o.duplicate_key).and_then(as_u64).filter(|&d| d != id);
    Ok(Raw { id, dup, timestamp, frames })
}

pub fn convert_str(text: &str, options: &ConvertOptions) -> Result<(Vec<ReportRecord>, ConvertStats)> {
    let mut stats = ConvertStats::default();
    let mut raws: BTreeMap<u64, Raw> = BTreeMap::new();
    for doc in parse_documents(text)? {
        match extract(&doc, options) {
            Ok(r) if !raws.contains_key(&r.id) => {
                raws.insert(r.id, r);
            }
            Ok(r) => {
                stats.skipped += 1;
                stats.first_errors.push(format!("repeated report id {}", r.id));
            }
            Err(e) => {
                stats.skipped += 1;
                if stats.first_errors.len() < crate::dataset::MAX_REPORTED {
                    stats.first_errors.push(e);
                }
            }
        }
    }
    let root = |mut id: u64, dangling: &mut usize| {
        let mut hops = 0;
        while let Some(next) = raws[&id].dup {
            if !raws.contains_key(&next) {
                *dangling += 1;
                break;
            }
            id = next;
            hops += 1;
            if hops > raws.len() {
                break;
            }
        }
        id
    };
    let mut out = Vec::with_capacity(raws.len());
    for r in raws.values() {
        let bucket_id = root(r.id, &mut stats.dangling_links);
        out.push(ReportRecord {
            report_id: r.id,
            bucket_id,
            timestamp: r.timestamp,
            frames: r.frames.clone(),
        });
    }
    stats.converted = out.len();
    if out.is_empty() {
        return Err(Error::Usage(format!("no convertible reports ({} skipped)", stats.skipped)));
    }
    Ok((out, stats))
}
