//! Task ingestion and curation: the supported task catalog, the on-disk
//! question schema, seeded subsampling, and primary-distractor selection.

mod catalog;
mod distractor;
mod schema;
mod subsample;

pub use catalog::{catalog, classify_domain, expert_role, Domain, TaskManifest};
pub use distractor::{
    distractor_selection_prompt, select_distractor, select_distractor_opts,
};
pub use schema::{load_task, write_task, Choice, DatasetError, Question};
pub use subsample::subsample;
