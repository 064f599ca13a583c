use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::backend::{Backend, BackendError, ChatTurn, CompletionParams};

/// Environment variable holding the API credential.
pub const API_KEY_VAR: &str = "MANBENCH_API_KEY";
/// Environment variable holding the default endpoint base URL.
pub const BASE_URL_VAR: &str = "MANBENCH_BASE_URL";

const MAX_ATTEMPTS: u32 = 3;
const BACKOFF_BASE_MS: u64 = 500;

/// OpenAI-compatible chat-completions client. One POST per call to
/// `{base_url}/chat/completions`, reading `choices[0].message.content`.
/// Transport errors and HTTP 429/5xx are retried up to three times with
/// exponential backoff; other client errors fail immediately.
pub struct LiveBackend {
    base_url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    backoff_base: Duration,
}

impl LiveBackend {
    /// Builds a client for `base_url` (explicit config wins over the
    /// `MANBENCH_BASE_URL` environment variable). The credential is read from
    /// `MANBENCH_API_KEY`; requests go out without an Authorization header
    /// when it is unset, which local inference servers accept.
    pub fn new(base_url: Option<&str>) -> Result<Self, BackendError> {
        let base_url = match base_url {
            Some(url) => url.to_string(),
            None => std::env::var(BASE_URL_VAR).map_err(|_| {
                BackendError::Transport(format!(
                    "no base URL: pass one in config or set {BASE_URL_VAR}"
                ))
            })?,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| BackendError::Transport(format!("build HTTP client: {e}")))?;
        Ok(LiveBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: std::env::var(API_KEY_VAR).ok(),
            client,
            backoff_base: Duration::from_millis(BACKOFF_BASE_MS),
        })
    }

    #[cfg(test)]
    fn with_fast_backoff(mut self) -> Self {
        self.backoff_base = Duration::from_millis(1);
        self
    }

    fn attempt(
        &self,
        messages: &[ChatTurn],
        params: &CompletionParams,
    ) -> Result<String, BackendError> {
        let wire_messages: Vec<_> = messages
            .iter()
            .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
            .collect();
        let mut body = json!({
            "model": params.model,
            "messages": wire_messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        for (k, v) in &params.extra {
            body[k] = v.clone();
        }

        let mut request = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;

        let status = response.status().as_u16();
        let text = response
            .text()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::HttpStatus { status, body: truncate(&text, 512) });
        }

        #[derive(Deserialize)]
        struct Completion {
            choices: Vec<Choice>,
        }
        #[derive(Deserialize)]
        struct Choice {
            message: Message,
        }
        #[derive(Deserialize)]
        struct Message {
            content: Option<String>,
        }

        let parsed: Completion = serde_json::from_str(&text)
            .map_err(|e| BackendError::MalformedResponse(format!("{e}: {}", truncate(&text, 256))))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::MalformedResponse("no choices[0].message.content".into()))
    }
}

impl Backend for LiveBackend {
    fn complete(
        &self,
        messages: &[ChatTurn],
        params: &CompletionParams,
    ) -> Result<String, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::MalformedResponse("empty message list".into()));
        }
        params.validate()?;
        let mut last_err = None;
        for attempt in 0..MAX_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(self.backoff_base * 2u32.pow(attempt - 1));
            }
            match self.attempt(messages, params) {
                Ok(content) => return Ok(content),
                Err(e) if e.retryable() && attempt + 1 < MAX_ATTEMPTS => {
                    log::warn!("backend attempt {} failed, retrying: {e}", attempt + 1);
                    last_err = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err.expect("at least one attempt"))
    }

    fn id(&self) -> String {
        format!("live:{}", self.base_url)
    }
}

fn truncate(s: &str, max: usize) -> String {
    if s.len() <= max {
        s.to_string()
    } else {
        let mut end = max;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &s[..end])
    }
}
