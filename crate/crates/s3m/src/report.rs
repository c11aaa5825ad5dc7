//! Metrics output: JSON, an aligned table and a per-query CSV.

use std::io::{self, Write};

use s3m_core::retrieval::{MetricsReport, RankedResult};

pub fn to_json(report: &MetricsReport) -> String {
    serde_json::to_string(report).expect("metrics serialize")
}

/// One row per method with columns RR@k for every k, then MRR. All
/// reports must share the same k set.
pub fn table(rows: &[(String, &MetricsReport)]) -> String {
    let ks: Vec<usize> = rows.first().map(|(_, r)| r.rr_at.keys().copied().collect()).unwrap_or_default();
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Method".len());
    let mut out = format!("{:<width$}", "Method");
    for k in &ks {
        out += &format!("  {:>7}", format!("RR@{k}"));
    }
    out += &format!("  {:>7}  {:>9}  {:>9}\n", "MRR", "queries", "skipped");
    for (name, r) in rows {
        out += &format!("{name:<width$}");
        for k in &ks {
            out += &format!("  {:>7.4}", r.rr_at.get(k).copied().unwrap_or(f64::NAN));
        }
        out += &format!("  {:>7.4}  {:>9}  {:>9}\n", r.mrr, r.n_queries, r.n_skipped);
    }
    out
}

pub const CSV_TOP: usize = 10;

pub fn write_per_query_csv(w: &mut impl Write, results: &[RankedResult]) -> io::Result<()> {
    writeln!(w, "report_id,rank_of_truth,top_{CSV_TOP}")?;
    for r in results {
        let rank = r.rank_of_truth.map(|x| x.to_string()).unwrap_or_default();
        let top: Vec<String> = r.top(CSV_TOP).map(|b| b.to_string()).collect();
        writeln!(w, "{},{},{}", r.query_report_id, rank, top.join(" "))?;
    }
    Ok(())
}
