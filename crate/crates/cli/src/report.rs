//! Turns a run ledger into metric reports on disk, in any of the three
//! formats the metrics module renders.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use manbench_core::{MetricsReport, OutcomeRecord, Protocol};

use crate::ledger::{ledger_path, read_ledger, LedgerEntry};
use crate::RunnerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] =
        [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }

    fn render(self, report: &MetricsReport) -> String {
        match self {
            ReportFormat::Json => report.to_json(),
            ReportFormat::Csv => report.to_csv(),
            ReportFormat::Markdown => report.to_markdown(),
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format '{other}' (expected json, csv, or markdown)")),
        }
    }
}

/// Aggregates ledger entries into a metrics report. Shift metrics compare
/// against the baseline set, so influence or guidance outcomes without any
/// baseline outcomes are an error rather than a silently absent column.
pub fn build_metrics(entries: &[LedgerEntry]) -> Result<MetricsReport, RunnerError> {
    if entries.is_empty() {
        return Err(RunnerError::Config("ledger holds no entries to report on".into()));
    }
    let has_baseline = entries.iter().any(|e| e.outcome.protocol == Protocol::B);
    let wants_shift = entries.iter().any(|e| e.outcome.protocol != Protocol::B);
    if wants_shift && !has_baseline {
        return Err(RunnerError::MissingBaseline);
    }
    let model = entries[0].subject_backend.clone();
    let records: Vec<OutcomeRecord> = entries
        .iter()
        .map(|e| OutcomeRecord {
            outcome: e.outcome.clone(),
            task: e.task.clone(),
            domain: e.domain.clone(),
            group_size: e.group_size,
        })
        .collect();
    Ok(MetricsReport::build(model, &records))
}

/// Renders the requested formats to `report.{json,csv,md}` next to the
/// ledger and returns the written paths.
pub fn write_reports(
    run_dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>, RunnerError> {
    let entries = read_ledger(&ledger_path(run_dir))?;
    let report = build_metrics(&entries)?;
    for warning in &report.warnings {
        log::warn!("report: {warning}");
    }
    let mut written = Vec::with_capacity(formats.len());
    for format in formats {
        let path = run_dir.join(format!("report.{}", format.extension()));
        fs::write(&path, format.render(&report))
            .map_err(|source| RunnerError::Io { path: path.display().to_string(), source })?;
        written.push(path);
    }
    Ok(written)
}
