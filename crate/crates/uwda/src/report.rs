//! Text tables and their JSON twins.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use uwda_core::metrics::MetricReport;
use uwda_core::pipeline::AblationReport;

use crate::error::Result;
use crate::formats::{write_json, write_text};

/// Per-image rows followed by a `mean` row.
pub fn metric_table(report: &MetricReport) -> String {
    let id_w = report.image_ids.iter().map(|s| s.len()).max().unwrap_or(0).max(5);
    let mut s = format!("{:<id_w$}", "image");
    for k in &report.metrics {
        let _ = write!(s, " {:>10}", k.name());
    }
    s.push('\n');
    for (id, row) in report.image_ids.iter().zip(&report.values) {
        let _ = write!(s, "{:<id_w$}", id);
        for v in row {
            let _ = write!(s, " {:>10.4}", v);
        }
        s.push('\n');
    }
    let _ = write!(s, "{:<id_w$}", "mean");
    for v in report.aggregate() {
        let _ = write!(s, " {:>10.4}", v);
    }
    s.push('\n');
    s
}

/// One line per variant with mean metrics, as printed in ablation tables.
pub fn ablation_table(reports: &[AblationReport]) -> String {
    reports.iter().map(|r| format!("{}\n", r)).collect()
}

/// Writes `<out>.txt` and `<out>.json`; returns both paths.
pub fn write_report<T: Serialize>(out: &Path, table: &str, value: &T) -> Result<(PathBuf, PathBuf)> {
    let (txt, json) = (out.with_extension("txt"), out.with_extension("json"));
    write_text(&txt, table)?;
    write_json(&json, value)?;
    Ok((txt, json))
}
