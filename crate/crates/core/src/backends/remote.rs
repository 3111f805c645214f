//! Chat-completions and embeddings over HTTP, with bounded retries and a
//! max-in-flight limit shared by all callers of one client.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{l2_normalize, BackendError, ChatBackend, ChatRequest, EmbeddingBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemoteConfig {
    /// Base URL; `/chat/completions` and `/embeddings` are appended.
    pub endpoint: String,
    pub model: String,
    pub embedding_model: String,
    /// Environment variable holding the bearer token. Never stored in records.
    pub auth_env: String,
    pub timeout_secs: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:8000/v1".into(),
            model: "gpt-4-0613".into(),
            embedding_model: "text-embedding-3-small".into(),
            auth_env: "DESKCRAFT_API_KEY".into(),
            timeout_secs: 60,
            retries: 3,
            backoff_ms: 500,
            max_in_flight: 4,
        }
    }
}

/// Counting semaphore.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Gate { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut free = self.0.free.lock().unwrap_or_else(|e| e.into_inner());
        *free += 1;
        self.0.cv.notify_one();
    }
}

enum Attempt {
    Done(String),
    Retry(BackendError),
    Fail(BackendError),
}

#[derive(Debug)]
struct Client {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    gate: Gate,
}

impl Client {
    fn new(cfg: RemoteConfig) -> Result<Self, BackendError> {
        if cfg.endpoint.is_empty() {
            return Err(BackendError::Config("remote endpoint is empty".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate::new(cfg.max_in_flight);
        Ok(Client { cfg, agent, gate })
    }

    fn once(&self, url: &str, body: &str) -> Attempt {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        let token = std::env::var(&self.cfg.auth_env).ok().filter(|t| !t.is_empty());
        if let Some(token) = &token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = match req.send(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(BackendError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(BackendError::Transport(e.to_string())),
        };
        match status {
            200..=299 => Attempt::Done(text),
            429 => Attempt::Retry(BackendError::RateLimited(0)),
            500..=599 => Attempt::Retry(BackendError::Transport(format!("HTTP {status}"))),
            _ => Attempt::Fail(BackendError::Transport(format!("HTTP {status}: {}", snippet(&text)))),
        }
    }

    /// POSTs with exponential backoff on transport errors, 429 and 5xx.
    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = format!("{}/{path}", self.cfg.endpoint.trim_end_matches('/'));
        let body = body.to_string();
        let _permit = self.gate.acquire();
        let attempts = self.cfg.retries + 1;
        let mut last = BackendError::Transport("no attempt made".into());
        for i in 0..attempts {
            if i > 0 {
                thread::sleep(Duration::from_millis(self.cfg.backoff_ms.saturating_mul(1 << (i - 1).min(16))));
            }
            match self.once(&url, &body) {
                Attempt::Done(text) => {
                    return serde_json::from_str(&text)
                        .map_err(|e| BackendError::MalformedResponse(format!("{e}: {}", snippet(&text))));
                }
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) => last = e,
            }
        }
        Err(match last {
            BackendError::RateLimited(_) => BackendError::RateLimited(attempts),
            e => e,
        })
    }
}

fn snippet(s: &str) -> String {
    s.chars().take(120).collect()
}

#[derive(Debug)]
pub struct RemoteChat {
    client: Client,
}

impl RemoteChat {
    pub fn new(cfg: RemoteConfig) -> Result<Self, BackendError> {
        Ok(RemoteChat { client: Client::new(cfg)? })
    }
}

impl ChatBackend for RemoteChat {
    fn id(&self) -> String {
        format!("remote:{}", self.client.cfg.model)
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate()?;
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| json!({"role": m.speaker.to_string(), "content": m.text}))
            .collect();
        let mut body = json!({
            "model": self.client.cfg.model,
            "messages": messages,
            "temperature": request.temperature,
            "n": 1,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        let v = self.client.post("chat/completions", &body)?;
        let text = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::MalformedResponse("missing choices[0].message.content".into()))?;
        if text.trim().is_empty() {
            return Err(BackendError::MalformedResponse("empty completion".into()));
        }
        Ok(text.to_string())
    }
}

#[derive(Debug)]
pub struct RemoteEmbedding {
    client: Client,
    dim: usize,
}

impl RemoteEmbedding {
    pub fn new(cfg: RemoteConfig, dim: usize) -> Result<Self, BackendError> {
        Ok(RemoteEmbedding { client: Client::new(cfg)?, dim })
    }
}

impl EmbeddingBackend for RemoteEmbedding {
    fn id(&self) -> String {
        format!("remote:{}-{}", self.client.cfg.embedding_model, self.dim)
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::EmptyText);
        }
        let body = json!({"model": self.client.cfg.embedding_model, "input": text});
        let v = self.client.post("embeddings", &body)?;
        let arr = v
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::MalformedResponse("missing data[0].embedding".into()))?;
        let mut out: Vec<f64> = arr
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| BackendError::MalformedResponse("non-numeric embedding".into())))
            .collect::<Result<_, _>>()?;
        if out.len() != self.dim {
            return Err(BackendError::MalformedResponse(format!(
                "embedding has dimension {}, expected {}",
                out.len(),
                self.dim
            )));
        }
        l2_normalize(&mut out)?;
        Ok(out)
    }
}
