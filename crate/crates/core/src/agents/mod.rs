//! Agent backend abstraction.
//!
//! Every protocol step funnels through [`Backend::complete`]. Three
//! implementations exist: [`LiveBackend`] speaks the OpenAI-compatible
//! chat-completions wire protocol, [`ScriptedBackend`] replays deterministic
//! responses for tests and offline runs, and [`CachedBackend`] wraps either
//! with a content-addressed on-disk cache.

mod backend;
mod cache;
mod identity;
mod live;
mod scripted;

pub use backend::{cache_key, Backend, BackendError, ChatTurn, CompletionParams, Role};
pub use cache::{CachedBackend, ResponseCache};
pub use identity::{assign_identities, AgentIdentity, AGENT_NAME_POOL};
pub use live::LiveBackend;
pub use scripted::{echo_baseline_choice_index, PatternRule, ScriptedBackend, ScriptedPolicy};
