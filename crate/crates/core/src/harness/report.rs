//! Output files of a simulation run.
//!
//! `records.csv` and `summary.json` are pure functions of the run inputs.
//! Only `provenance.json` carries a timestamp and the thread count.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{DesignSummary, MwuEntry, Provenance, SimulationConfig, SimulationReport};
use crate::error::Result;
use crate::metrics::MetricRecord;

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PROVENANCE_FILE: &str = "provenance.json";

pub const RECORDS_HEADER: [&str; 6] = [
    "design",
    "repeat",
    "mean_abs_diff",
    "kl_divergence",
    "total_abs_diff",
    "total_abs_diff_normalized_pi",
];

pub fn write_records_csv<W: Write>(out: W, records: &[MetricRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(RECORDS_HEADER)?;
    for r in records {
        wtr.write_record([
            r.design_name.clone(),
            r.repeat_index.to_string(),
            r.mean_abs_diff.to_string(),
            r.kl_divergence.to_string(),
            r.total_abs_diff.to_string(),
            r.total_abs_diff_normalized_pi.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    status: &'static str,
    repeats: usize,
    failed_repeats: usize,
    designs: &'a [DesignSummary],
    alternative: &'static str,
    mann_whitney: &'a [MwuEntry],
    provenance: &'a Provenance,
}

pub fn write_summary_json<W: Write>(mut out: W, report: &SimulationReport) -> Result<()> {
    let doc = SummaryDocument {
        status: if report.degraded { "degraded" } else { "ok" },
        repeats: report.repeats,
        failed_repeats: report.failed_repeats,
        designs: &report.summaries,
        alternative: "less",
        mann_whitney: &report.mwu,
        provenance: &report.provenance,
    };
    serde_json::to_writer_pretty(&mut out, &doc).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct ProvenanceDocument<'a> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    config: &'a SimulationConfig,
    threads: Option<usize>,
    generated_unix_seconds: u64,
}

pub fn write_provenance_json<W: Write>(
    mut out: W,
    report: &SimulationReport,
    config: &SimulationConfig,
) -> Result<()> {
    let doc = ProvenanceDocument {
        provenance: &report.provenance,
        config,
        threads: config.threads,
        generated_unix_seconds: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    serde_json::to_writer_pretty(&mut out, &doc).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Writes all three files into `dir`, creating it if needed.
pub fn write_outputs(dir: impl AsRef<Path>, report: &SimulationReport, config: &SimulationConfig) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let paths = [RECORDS_FILE, SUMMARY_FILE, PROVENANCE_FILE].map(|f| dir.join(f));
    write_records_csv(std::io::BufWriter::new(std::fs::File::create(&paths[0])?), &report.records)?;
    write_summary_json(std::io::BufWriter::new(std::fs::File::create(&paths[1])?), report)?;
    write_provenance_json(std::io::BufWriter::new(std::fs::File::create(&paths[2])?), report, config)?;
    Ok(paths.to_vec())
}
