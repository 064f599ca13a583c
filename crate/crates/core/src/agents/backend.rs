use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Message role in a chat exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

/// One utterance in an interaction. `speaker_name` is display-only: it names
/// the group agent a turn belongs to when transcripts are rendered into
/// prompts, and it is deliberately excluded from [`cache_key`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_name: Option<String>,
}

impl ChatTurn {
    pub fn system(content: impl Into<String>) -> Self {
        ChatTurn { role: Role::System, content: content.into(), speaker_name: None }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatTurn { role: Role::User, content: content.into(), speaker_name: None }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatTurn { role: Role::Assistant, content: content.into(), speaker_name: None }
    }

    pub fn assistant_as(name: impl Into<String>, content: impl Into<String>) -> Self {
        ChatTurn {
            role: Role::Assistant,
            content: content.into(),
            speaker_name: Some(name.into()),
        }
    }
}

/// Decoding parameters for a completion call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Extra provider-specific scalar fields, passed through to the live wire
    /// body verbatim. Kept sorted so serialization is canonical.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl CompletionParams {
    pub fn new(model: impl Into<String>) -> Self {
        CompletionParams {
            model: model.into(),
            temperature: 0.0,
            max_tokens: 1024,
            extra: BTreeMap::new(),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::MalformedResponse(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::MalformedResponse("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("scripted backend exhausted: {0}")]
    ScriptExhausted(String),
    #[error("backend I/O: {0}")]
    Io(String),
}

impl BackendError {
    /// Transport failures and throttling/server statuses are worth retrying;
    /// other client errors are not.
    pub fn retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::HttpStatus { status, .. } => {
                *status == 429 || (500..=599).contains(status)
            }
            _ => false,
        }
    }
}

/// A completion provider. Implementations must be callable from multiple
/// worker threads at once and must never mutate the passed messages.
pub trait Backend: Send + Sync {
    fn complete(
        &self,
        messages: &[ChatTurn],
        params: &CompletionParams,
    ) -> Result<String, BackendError>;

    /// Stable identifier recorded in ledger entries, e.g. `live:gpt-4o-mini`
    /// or `scripted:echo-baseline`.
    fn id(&self) -> String;
}

impl Backend for Box<dyn Backend> {
    fn complete(
        &self,
        messages: &[ChatTurn],
        params: &CompletionParams,
    ) -> Result<String, BackendError> {
        self.as_ref().complete(messages, params)
    }

    fn id(&self) -> String {
        self.as_ref().id()
    }
}

/// Content address of a completion request: SHA-256 over a canonical
/// serialization of roles, contents, model, temperature, max_tokens, and
/// extra params. `speaker_name` never enters the digest, so transcript
/// cosmetics cannot cause cache misses.
pub fn cache_key(messages: &[ChatTurn], params: &CompletionParams) -> String {
    #[derive(Serialize)]
    struct KeyTurn<'a> {
        role: &'static str,
        content: &'a str,
    }
    #[derive(Serialize)]
    struct KeyForm<'a> {
        messages: Vec<KeyTurn<'a>>,
        model: &'a str,
        temperature: f64,
        max_tokens: u32,
        extra: &'a BTreeMap<String, serde_json::Value>,
    }
    let form = KeyForm {
        messages: messages
            .iter()
            .map(|m| KeyTurn { role: m.role.as_str(), content: &m.content })
            .collect(),
        model: &params.model,
        temperature: params.temperature,
        max_tokens: params.max_tokens,
        extra: &params.extra,
    };
    let bytes = serde_json::to_vec(&form).expect("canonical key form serializes");
    let digest = Sha256::digest(&bytes);
    hex::encode(digest)
}
