//! The six interaction protocols as deterministic state machines: role
//! sequencing, misleading-narrative generation, subject querying, memory
//! consolidation and re-query, plus every prompt template and the answer
//! parsing cascade.

mod archetype;
pub(crate) mod parse;
pub(crate) mod run;
pub mod templates;

pub use archetype::{role_sequence, Archetype, Protocol, ProtocolError, RoleSequence};
pub use parse::{consolidate_memory, parse_answer};
pub use run::{
    generate_generic_turn, generate_guidance_turn, generate_role_turn, run_protocol,
    ProtocolOutcome, ProtocolSession,
};
pub use templates::build_baseline_prompt;
