//! Opt-in client for a chat-completions endpoint.

use std::time::Duration;

use drawsight_core::http::{self, HttpError};
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("completion response is not valid: {0}")]
    InvalidResponse(String),
}

impl LlmError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Http(HttpError::Unreachable(_)) => "Unreachable",
            Self::Http(HttpError::Timeout(_)) => "Timeout",
            Self::Http(HttpError::BadResponse { .. }) | Self::InvalidResponse(_) => "BadResponse",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LlmClient {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

impl LlmClient {
    /// Sends `prompt` as a single user message at temperature 0.
    pub fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{ "role": "user", "content": prompt }],
        })
        .to_string();
        let auth = self.api_key.as_ref().map(|k| format!("Bearer {k}"));
        let headers: Vec<(&str, &str)> = auth.iter().map(|a| ("authorization", a.as_str())).collect();
        let raw = http::post(
            &self.endpoint,
            "application/json",
            &headers,
            body.as_bytes(),
            self.timeout,
        )?;
        let parsed: Completion = serde_json::from_slice(&raw).map_err(|e| LlmError::InvalidResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::InvalidResponse("no choices".into()))
    }
}
