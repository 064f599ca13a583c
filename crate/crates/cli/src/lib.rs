//! Experiment orchestration on top of the core crate: run configuration,
//! bounded-parallel execution into an append-only ledger, resume, and
//! report emission.

pub mod config;
pub mod experiment;
pub mod ledger;
pub mod pool;
pub mod report;

pub use config::{build_backend, ModelConfig, RunConfig};
pub use experiment::{plan_units, run_experiment, RunMode, RunSummary, Unit};
pub use ledger::{
    canonical_bytes, canonicalize, completed_units, ledger_path, read_ledger, LedgerEntry,
    LedgerWriter, UnitKey,
};
pub use pool::bounded_map;
pub use report::{build_metrics, write_reports, ReportFormat};

use manbench_core::{BackendError, DatasetError, DefenseError, MetricsError};

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("run '{run_id}' already has ledger entries; resume it instead")]
    RunExists { run_id: String },
    #[error("run '{run_id}' was started with a different config (snapshot digest {snapshot}, requested {requested})")]
    ConfigMismatch { run_id: String, snapshot: String, requested: String },
    #[error("no run snapshot at {0}")]
    MissingRun(String),
    #[error("{path} line {line}: {message}")]
    LedgerParse { path: String, line: usize, message: String },
    #[error("ledger holds influence outcomes but no baseline set; shift metrics need protocol B")]
    MissingBaseline,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Defense(#[from] DefenseError),
}
