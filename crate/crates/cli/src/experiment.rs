//! Experiment orchestration: unit planning over the protocol × group size ×
//! question cross product, bounded-parallel execution, and immediate ledger
//! appends from a single writer.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use manbench_core::{
    load_task, run_defended_protocol, run_protocol, subsample, Protocol, ProtocolSession, Question,
};

use crate::config::{build_backend, RunConfig};
use crate::ledger::{
    completed_units, ledger_path, read_ledger, LedgerEntry, LedgerWriter, UnitKey,
};
use crate::pool::bounded_map;
use crate::RunnerError;

/// One independent piece of work: a protocol applied to a question at one
/// group size. Baseline units carry group size 0 — there is no group.
#[derive(Debug, Clone)]
pub struct Unit {
    pub protocol: Protocol,
    pub group_size: usize,
    pub question: Question,
}

impl Unit {
    pub fn describe(&self) -> String {
        format!("{}/g{}/{}", self.protocol, self.group_size, self.question.id)
    }

    pub fn key(&self) -> UnitKey {
        (self.protocol, self.group_size, self.question.id.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Fresh,
    Resume,
}

/// What a run did, for the caller to print and turn into an exit status.
#[derive(Debug)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub ledger: PathBuf,
    /// Units already in the ledger when the run started.
    pub already_complete: usize,
    pub planned: usize,
    pub succeeded: usize,
    pub failed: Vec<(String, String)>,
}

impl RunSummary {
    pub fn all_succeeded(&self) -> bool {
        self.failed.is_empty()
    }
}

/// Loads every configured dataset, rejects cross-file id collisions, and
/// applies the seeded question cap.
pub fn load_questions(config: &RunConfig) -> Result<Vec<Question>, RunnerError> {
    let mut questions = Vec::new();
    let mut seen = BTreeSet::new();
    for path in &config.datasets {
        for q in load_task(path)? {
            if !seen.insert(q.id.clone()) {
                return Err(RunnerError::Config(format!(
                    "question id '{}' appears more than once across datasets",
                    q.id
                )));
            }
            questions.push(q);
        }
    }
    if questions.is_empty() {
        return Err(RunnerError::Config("datasets contain no questions".into()));
    }
    match config.question_limit {
        Some(0) => Err(RunnerError::Config("question_limit must be at least 1".into())),
        Some(limit) => Ok(subsample(&questions, limit, config.seed)),
        None => Ok(questions),
    }
}

/// The unit cross product in canonical order, minus already-completed keys.
pub fn plan_units(
    config: &RunConfig,
    questions: &[Question],
    completed: &BTreeSet<UnitKey>,
) -> Vec<Unit> {
    let mut units = Vec::new();
    for protocol in &config.protocols {
        let sizes: &[usize] =
            if *protocol == Protocol::B { &[0] } else { &config.group_sizes };
        for &group_size in sizes {
            for question in questions {
                let unit = Unit { protocol: *protocol, group_size, question: question.clone() };
                if !completed.contains(&unit.key()) {
                    units.push(unit);
                }
            }
        }
    }
    units
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Reads a ledger and, when a killed process left a torn trailing line,
/// rewrites the file to exactly its parseable entries before any further
/// appends land after the tear.
fn repair_and_read(path: &Path) -> Result<Vec<LedgerEntry>, RunnerError> {
    let entries = read_ledger(path)?;
    let mut clean = String::new();
    for entry in &entries {
        clean.push_str(&serde_json::to_string(entry).expect("ledger entry serializes"));
        clean.push('\n');
    }
    let raw = fs::read_to_string(path)
        .map_err(|source| RunnerError::Io { path: path.display().to_string(), source })?;
    if raw != clean {
        let tmp = path.with_extension("jsonl.repair");
        fs::write(&tmp, &clean)
            .map_err(|source| RunnerError::Io { path: tmp.display().to_string(), source })?;
        fs::rename(&tmp, path)
            .map_err(|source| RunnerError::Io { path: path.display().to_string(), source })?;
        log::warn!("repaired torn tail of {}", path.display());
    }
    Ok(entries)
}

/// Executes (or completes) a run. Unit failures are collected, never
/// propagated: every other unit still runs and lands in the ledger.
pub fn run_experiment(config: &RunConfig, mode: RunMode) -> Result<RunSummary, RunnerError> {
    config.validate()?;
    let run_dir = config.run_dir();
    fs::create_dir_all(&run_dir)
        .map_err(|source| RunnerError::Io { path: run_dir.display().to_string(), source })?;
    let ledger = ledger_path(&run_dir);
    let digest = config.digest();

    let prior = match mode {
        RunMode::Fresh => {
            if ledger.exists() {
                if !read_ledger(&ledger)?.is_empty() {
                    return Err(RunnerError::RunExists { run_id: config.run_id.clone() });
                }
                fs::remove_file(&ledger).map_err(|source| RunnerError::Io {
                    path: ledger.display().to_string(),
                    source,
                })?;
            }
            config.write_snapshot(&run_dir)?;
            Vec::new()
        }
        RunMode::Resume => {
            let snapshot = RunConfig::read_snapshot(&run_dir)?;
            let snapshot_digest = snapshot.digest();
            if snapshot_digest != digest {
                return Err(RunnerError::ConfigMismatch {
                    run_id: config.run_id.clone(),
                    snapshot: snapshot_digest,
                    requested: digest,
                });
            }
            if ledger.exists() { repair_and_read(&ledger)? } else { Vec::new() }
        }
    };
    let completed = completed_units(&prior);
    let questions = load_questions(config)?;
    let units = plan_units(config, &questions, &completed);

    let cache_dir = config.cache_dir.as_deref();
    let subject = build_backend(&config.subject.model, cache_dir)?;
    let narrator = build_backend(&config.narrator.model, cache_dir)?;
    let session = ProtocolSession {
        subject: subject.as_ref(),
        narrator: narrator.as_ref(),
        subject_params: config.subject.params(),
        narrator_params: config.narrator.params(),
    };
    let subject_id = subject.id();
    let narrator_id = narrator.id();

    let mut writer = LedgerWriter::open(&ledger)?;
    let mut failed: Vec<(String, String)> = Vec::new();
    let mut succeeded = 0usize;
    let defense = config.defense;

    bounded_map(
        &units,
        config.max_parallel,
        |unit| match defense {
            Some(kind) if unit.protocol.is_influence() => run_defended_protocol(
                kind,
                unit.protocol,
                &session,
                &unit.question,
                unit.group_size,
            ),
            _ => run_protocol(&session, unit.protocol, &unit.question, unit.group_size),
        },
        |i, result| {
            let unit = &units[i];
            match result {
                Ok(outcome) => {
                    let entry = LedgerEntry {
                        run_id: config.run_id.clone(),
                        config_digest: digest.clone(),
                        timestamp: unix_now(),
                        subject_backend: subject_id.clone(),
                        narrator_backend: narrator_id.clone(),
                        task: unit.question.task.clone(),
                        domain: unit.question.domain.as_str().to_string(),
                        group_size: unit.group_size,
                        outcome,
                    };
                    match writer.append(&entry) {
                        Ok(()) => {
                            succeeded += 1;
                            log::info!("completed {}", unit.describe());
                        }
                        Err(e) => failed.push((unit.describe(), format!("ledger append: {e}"))),
                    }
                }
                Err(e) => {
                    log::error!("{} failed: {e}", unit.describe());
                    failed.push((unit.describe(), e.to_string()));
                }
            }
        },
    );

    Ok(RunSummary {
        run_dir,
        ledger,
        already_complete: completed.len(),
        planned: units.len(),
        succeeded,
        failed,
    })
}
