//! Harness for measuring how multi-agent conversation implants collective
//! false memories in language models: task curation, agent backends,
//! interaction protocols, shift metrics, and defenses.

pub mod agents;
pub mod dataset;
pub mod defenses;
pub mod metrics;
pub mod protocols;
pub mod text;

pub use agents::{
    assign_identities, cache_key, AgentIdentity, Backend, BackendError, CachedBackend, ChatTurn,
    CompletionParams, LiveBackend, ResponseCache, Role, ScriptedBackend,
};
pub use dataset::{
    classify_domain, expert_role, load_task, select_distractor, subsample, write_task, Choice,
    DatasetError, Domain, Question, TaskManifest,
};
pub use defenses::{
    build_cooperative_record, build_resilience_record, emit_sft_dataset, parse_defense_report,
    run_defended_protocol, wrap_cognitive_anchoring, wrap_source_scrutiny, DefenseError,
    DefenseKind, DefenseReport, SftKind, SftRecord, SftSummary,
};
pub use metrics::{
    breakdown, build_group_report, error_rate, max_reality_shift, reality_shift, GroupKey,
    GroupReport, MetricsError, MetricsReport, OutcomeRecord, OutcomeSet, ProtocolMetrics, Ratio,
};
pub use protocols::{
    build_baseline_prompt, consolidate_memory, parse_answer, role_sequence, run_protocol,
    Archetype, Protocol, ProtocolError, ProtocolOutcome, ProtocolSession, RoleSequence,
};
