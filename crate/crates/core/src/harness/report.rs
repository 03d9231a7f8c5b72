//! Comparison tables over corpus-level metric rows.
//!
//! Two renderings with the same columns, in [`METRIC_COLUMNS`] order:
//!
//! * delimited (CSV): `system,R-1,…,FRS`; values to 4 decimals, the best
//!   value of each column suffixed with `*`
//! * human readable (Markdown): headers carry the direction arrow, best
//!   values are bold
//!
//! "Best" is the maximum for ↑ columns and the minimum for ↓ columns; ties
//! are all marked.

use std::fs;
use std::path::Path;

use super::HarnessError;
use crate::metrics::{Direction, MetricReport, METRIC_COLUMNS};

pub const CSV_FILE: &str = "report.csv";
pub const MARKDOWN_FILE: &str = "report.md";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Delimited,
    Markdown,
}

/// `best[row][col]` is true when that cell holds the column's best value.
pub fn best_cells(rows: &[(String, MetricReport)]) -> Vec<[bool; 15]> {
    let mut best = [f64::NAN; 15];
    for (col, (_, dir)) in METRIC_COLUMNS.iter().enumerate() {
        let vals = rows.iter().map(|(_, r)| r.values()[col]).filter(|v| !v.is_nan());
        best[col] = match dir {
            Direction::HigherIsBetter => vals.fold(f64::NEG_INFINITY, f64::max),
            Direction::LowerIsBetter => vals.fold(f64::INFINITY, f64::min),
        };
    }
    rows.iter()
        .map(|(_, r)| {
            let v = r.values();
            std::array::from_fn(|c| v[c] == best[c])
        })
        .collect()
}

pub fn render(rows: &[(String, MetricReport)], format: ReportFormat) -> String {
    match format {
        ReportFormat::Delimited => render_csv(rows),
        ReportFormat::Markdown => render_markdown(rows),
    }
}

fn render_csv(rows: &[(String, MetricReport)]) -> String {
    let marks = best_cells(rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once("system").chain(METRIC_COLUMNS.iter().map(|(n, _)| *n));
    w.write_record(header).expect("in-memory write");
    for ((name, report), mark) in rows.iter().zip(&marks) {
        let cells = report
            .values()
            .iter()
            .zip(mark)
            .map(|(v, &b)| format!("{v:.4}{}", if b { "*" } else { "" }))
            .collect::<Vec<_>>();
        w.write_record(std::iter::once(name.clone()).chain(cells))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 csv")
}

fn render_markdown(rows: &[(String, MetricReport)]) -> String {
    let marks = best_cells(rows);
    let mut out = String::from("| System |");
    for (name, dir) in METRIC_COLUMNS {
        out.push_str(&format!(" {name} {} |", dir.arrow()));
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(METRIC_COLUMNS.len()));
    out.push('\n');
    for ((name, report), mark) in rows.iter().zip(&marks) {
        out.push_str(&format!("| {} |", name.replace('|', "\\|")));
        for (v, &b) in report.values().iter().zip(mark) {
            if b {
                out.push_str(&format!(" **{v:.4}** |"));
            } else {
                out.push_str(&format!(" {v:.4} |"));
            }
        }
        out.push('\n');
    }
    out
}

/// Writes both renderings into `dir` under their stable names.
pub fn write_report(dir: &Path, rows: &[(String, MetricReport)]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_owned(),
        source,
    })?;
    for (file, format) in [
        (CSV_FILE, ReportFormat::Delimited),
        (MARKDOWN_FILE, ReportFormat::Markdown),
    ] {
        let path = dir.join(file);
        fs::write(&path, render(rows, format))
            .map_err(|source| HarnessError::Io { path, source })?;
    }
    Ok(())
}
