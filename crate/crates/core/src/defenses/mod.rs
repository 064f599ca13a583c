//! Countermeasures: prompt-level defense wrappers with structured-report
//! parsing, defended protocol runs, and fine-tuning dataset generation
//! (resilience plus cooperative guidance records).

mod report;
mod run;
mod sft;
mod wrap;

pub use report::{parse_defense_report, DefenseReport};
pub use run::run_defended_protocol;
pub use sft::{
    build_cooperative_record, build_resilience_record, corrective_generation_prompt,
    emit_sft_dataset, enriching_generation_prompt, DefenseError, SftKind, SftRecord, SftSummary,
};
pub use wrap::{wrap_cognitive_anchoring, wrap_source_scrutiny, DefenseKind};
