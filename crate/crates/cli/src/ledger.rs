//! The append-only run ledger: one JSON line per completed unit, written by
//! a single appender, readable mid-run and after a crash.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use manbench_core::{Protocol, ProtocolOutcome};
use serde::{Deserialize, Serialize};

use crate::RunnerError;

/// One ledger line: a protocol outcome plus the run identity it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub run_id: String,
    pub config_digest: String,
    /// Unix seconds at append time; zeroed by [`canonicalize`].
    pub timestamp: u64,
    pub subject_backend: String,
    pub narrator_backend: String,
    pub task: String,
    pub domain: String,
    /// Narrator seats in the unit; 0 for baseline, which has no group.
    pub group_size: usize,
    pub outcome: ProtocolOutcome,
}

/// What identifies a unit of work within a run.
pub type UnitKey = (Protocol, usize, String);

impl LedgerEntry {
    pub fn unit_key(&self) -> UnitKey {
        (self.outcome.protocol, self.group_size, self.outcome.question_id.clone())
    }
}

pub fn ledger_path(run_dir: &Path) -> PathBuf {
    run_dir.join("ledger.jsonl")
}

/// Append handle for one run's ledger. Each entry goes out as exactly one
/// `write_all` of a full line followed by a flush, so a killed process leaves
/// at most one torn trailing line behind.
pub struct LedgerWriter {
    path: PathBuf,
    file: File,
}

impl LedgerWriter {
    pub fn open(path: &Path) -> Result<LedgerWriter, RunnerError> {
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|source| {
            RunnerError::Io { path: path.display().to_string(), source }
        })?;
        Ok(LedgerWriter { path: path.to_path_buf(), file })
    }

    pub fn append(&mut self, entry: &LedgerEntry) -> Result<(), RunnerError> {
        let mut line = serde_json::to_string(entry)
            .map_err(|e| RunnerError::Config(format!("serialize ledger entry: {e}")))?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|()| self.file.flush())
            .map_err(|source| RunnerError::Io { path: self.path.display().to_string(), source })
    }
}

/// Reads a ledger back. A malformed final line is dropped with a warning
/// (the mark of a process killed mid-append); a malformed line anywhere
/// else is an error.
pub fn read_ledger(path: &Path) -> Result<Vec<LedgerEntry>, RunnerError> {
    let body = std::fs::read_to_string(path)
        .map_err(|source| RunnerError::Io { path: path.display().to_string(), source })?;
    let lines: Vec<(usize, &str)> = body
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .collect();
    let mut entries = Vec::with_capacity(lines.len());
    for (i, (line_no, line)) in lines.iter().enumerate() {
        match serde_json::from_str::<LedgerEntry>(line) {
            Ok(entry) => entries.push(entry),
            Err(e) if i + 1 == lines.len() => {
                log::warn!(
                    "{} line {}: dropping torn trailing entry ({e})",
                    path.display(),
                    line_no + 1
                );
            }
            Err(e) => {
                return Err(RunnerError::LedgerParse {
                    path: path.display().to_string(),
                    line: line_no + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(entries)
}

/// Unit keys already present in a ledger.
pub fn completed_units(entries: &[LedgerEntry]) -> BTreeSet<UnitKey> {
    entries.iter().map(LedgerEntry::unit_key).collect()
}

/// Strips timestamps and imposes the canonical unit order, so two ledgers
/// of the same run compare equal regardless of worker scheduling.
pub fn canonicalize(mut entries: Vec<LedgerEntry>) -> Vec<LedgerEntry> {
    for entry in &mut entries {
        entry.timestamp = 0;
    }
    entries.sort_by(|a, b| a.unit_key().cmp(&b.unit_key()));
    entries
}

/// The canonicalized ledger as JSONL bytes, for whole-file comparison.
pub fn canonical_bytes(entries: Vec<LedgerEntry>) -> String {
    let mut out = String::new();
    for entry in canonicalize(entries) {
        out.push_str(&serde_json::to_string(&entry).expect("ledger entry serializes"));
        out.push('\n');
    }
    out
}
