//! Language-model and embedding providers: a deterministic scripted oracle,
//! a hashed bag-of-words embedder and a remote HTTP client.

mod hashed;
mod remote;
mod scripted;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hashed::HashedBow;
pub use remote::{RemoteChat, RemoteConfig, RemoteEmbedding};
pub use scripted::{oracle_steps, ScriptedBackend};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after {0} attempts")]
    RateLimited(u32),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("empty text")]
    EmptyText,
    #[error("text embeds to the zero vector")]
    ZeroEmbedding,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    System,
    User,
    Assistant,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Speaker::System => "system",
            Speaker::User => "user",
            Speaker::Assistant => "assistant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub role_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        match self.messages.first() {
            None => Err(BackendError::InvalidRequest("no messages".into())),
            Some(m) if m.speaker != Speaker::System => {
                Err(BackendError::InvalidRequest("first message must come from the system".into()))
            }
            _ if !(self.temperature >= 0.0 && self.temperature.is_finite()) => {
                Err(BackendError::InvalidRequest(format!("bad temperature {}", self.temperature)))
            }
            _ => Ok(()),
        }
    }

    /// Text of the last user message, or "" if there is none.
    pub fn latest_user(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.speaker == Speaker::User)
            .map(|m| m.text.as_str())
            .unwrap_or("")
    }
}

/// A chat-completion provider. Implementations must tolerate concurrent callers.
pub trait ChatBackend: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

/// A text embedder producing L2-normalized vectors of fixed dimension.
pub trait EmbeddingBackend: Send + Sync {
    fn id(&self) -> String;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    HashedBow,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingSpec {
    pub backend: EmbeddingKind,
    pub dimension: usize,
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        EmbeddingSpec { backend: EmbeddingKind::HashedBow, dimension: 256 }
    }
}

/// Scales `v` to unit length in place.
pub fn l2_normalize(v: &mut [f64]) -> Result<(), BackendError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(BackendError::ZeroEmbedding);
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    Ok(())
}

/// Number of alphanumeric runs; the token estimate used for budgets.
pub fn estimate_tokens(text: &str) -> usize {
    let mut n = 0;
    let mut in_run = false;
    for c in text.chars() {
        let alnum = c.is_alphanumeric();
        if alnum && !in_run {
            n += 1;
        }
        in_run = alnum;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation() {
        let mut req = ChatRequest {
            role_id: "planner".into(),
            messages: vec![],
            temperature: 0.0,
            seed: None,
        };
        assert!(req.validate().is_err());
        req.messages.push(ChatMessage { speaker: Speaker::User, text: "hi".into() });
        assert!(req.validate().is_err());
        req.messages.insert(0, ChatMessage { speaker: Speaker::System, text: "sys".into() });
        assert!(req.validate().is_ok());
        assert_eq!(req.latest_user(), "hi");
    }

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("done wooden_tool: log=3"), 5);
    }
}
