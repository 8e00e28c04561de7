//! Result serialization: experiment CSV, gnuplot data files, and the
//! scenario-level group/flow tables.
//!
//! Floats are written with Rust's shortest-round-trip formatting, so parsing
//! a CSV back recovers every numeric field exactly and rerunning the same
//! experiment rewrites the same bytes. Labels and group names never contain
//! commas (scenario validation and the experiment builders guarantee it), so
//! no quoting is needed.

use std::fmt::Write as _;
use std::num::{ParseFloatError, ParseIntError};

use gwshape_core::sim::MetricsReport;

use crate::experiments::{compare_utilization, ExperimentResult};

pub const EXPERIMENT_CSV_HEADER: &str =
    "experiment,label,group,bytes,packets,drops,utilization,mean_delay_us,delay_stddev_us";

/// One variant x group row, as written to and read back from experiment CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub experiment: u8,
    pub label: String,
    pub group: String,
    pub bytes: u64,
    pub packets: u64,
    pub drops: u64,
    pub utilization: f64,
    pub mean_delay_us: f64,
    pub delay_stddev_us: f64,
}

/// Experiment results as CSV: one row per (variant, group), variants already
/// label-sorted, groups in policy declaration order.
pub fn experiment_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(EXPERIMENT_CSV_HEADER);
    out.push('\n');
    for variant in &result.variants {
        for group in &variant.report.groups {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                result.experiment,
                variant.label,
                group.name,
                group.bytes,
                group.packets,
                group.drops,
                variant.report.utilization,
                group.mean_delay_us,
                group.delay_stddev_us,
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvParseError {
    pub line: usize,
    pub msg: String,
}

impl std::fmt::Display for CsvParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "csv line {}: {}", self.line, self.msg)
    }
}

impl std::error::Error for CsvParseError {}

/// Inverse of [`experiment_csv`]: numeric fields round-trip exactly.
pub fn parse_experiment_csv(text: &str) -> Result<Vec<CsvRow>, CsvParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == EXPERIMENT_CSV_HEADER => {}
        other => {
            return Err(CsvParseError {
                line: 1,
                msg: format!("expected header {EXPERIMENT_CSV_HEADER:?}, got {other:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let err = |msg: String| CsvParseError { line: idx + 1, msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(err(format!("expected 9 fields, got {}", fields.len())));
        }
        let int = |i: usize| -> Result<u64, CsvParseError> {
            fields[i]
                .parse()
                .map_err(|e: ParseIntError| err(format!("field {i}: {e}")))
        };
        let float = |i: usize| -> Result<f64, CsvParseError> {
            fields[i]
                .parse()
                .map_err(|e: ParseFloatError| err(format!("field {i}: {e}")))
        };
        rows.push(CsvRow {
            experiment: int(0)? as u8,
            label: fields[1].to_string(),
            group: fields[2].to_string(),
            bytes: int(3)?,
            packets: int(4)?,
            drops: int(5)?,
            utilization: float(6)?,
            mean_delay_us: float(7)?,
            delay_stddev_us: float(8)?,
        });
    }
    Ok(rows)
}

/// Gnuplot-friendly data: one block per variant label, columns are
/// group index, group name, share of measured bytes, and throughput in
/// bits per second. A trailing summary block carries per-variant
/// utilization against the disabled baseline (`plot ... index N`).
pub fn experiment_plot_data(result: &ExperimentResult) -> String {
    let mut out = format!("# experiment {}\n", result.experiment);
    for variant in &result.variants {
        let r = &variant.report;
        let _ = writeln!(out, "\n# variant {}", variant.label);
        let _ = writeln!(out, "# idx group bytes_share throughput_bps");
        let total = r.total_bytes.max(1) as f64;
        let secs = r.duration_us as f64 / 1e6;
        for (i, g) in r.groups.iter().enumerate() {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                i,
                g.name,
                g.bytes as f64 / total,
                g.bytes as f64 * 8.0 / secs,
            );
        }
    }
    let _ = writeln!(out, "\n# summary");
    let _ = writeln!(out, "# idx label utilization delta_vs_baseline");
    for (i, d) in compare_utilization(result).iter().enumerate() {
        let _ = writeln!(
            out,
            "{} \"{}\" {} {}",
            i, d.label, d.utilization, d.delta_vs_baseline
        );
    }
    out
}

/// Per-group and per-flow tables for a single scenario run.
pub fn scenario_report_csv(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# measured bound: {}", report.measured.as_str());
    let _ = writeln!(
        out,
        "# link {} bps, {} us simulated, utilization {}",
        report.link_rate, report.duration_us, report.utilization
    );
    let _ = writeln!(
        out,
        "# totals: {} bytes, {} packets, {} drops",
        report.total_bytes, report.total_packets, report.total_drops
    );
    out.push_str("section,name,bytes,packets,drops,mean_delay_us,delay_stddev_us,max_delay_us\n");
    for (section, rows) in [("group", &report.groups), ("flow", &report.flows)] {
        for u in rows.iter() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                section,
                u.name,
                u.bytes,
                u.packets,
                u.drops,
                u.mean_delay_us,
                u.delay_stddev_us,
                u.max_delay_us
            );
        }
    }
    out
}

/// Plain-text utilization table printed after `run`.
pub fn utilization_table(result: &ExperimentResult) -> String {
    let deltas = compare_utilization(result);
    let width = deltas
        .iter()
        .map(|d| d.label.len())
        .max()
        .unwrap_or(5)
        .max("label".len());
    let mut out = format!("{:<width$}  {:>12}  {:>12}\n", "label", "util", "delta");
    for d in &deltas {
        let _ = writeln!(
            out,
            "{:<width$}  {:>12.6}  {:>+12.6}",
            d.label, d.utilization, d.delta_vs_baseline
        );
    }
    out
}

/// Per-second departed bytes for one variant, for load-over-time plots.
pub fn timeline_plot_data(report: &MetricsReport) -> String {
    let mut out = String::from("# second bytes\n");
    for (sec, bytes) in report.timeline.iter().enumerate() {
        let _ = writeln!(out, "{sec} {bytes}");
    }
    out
}
