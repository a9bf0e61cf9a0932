//! Generic chat-style HTTP rewriter backend with retries and cassettes.
//!
//! Wire envelope: HTTP POST with a UTF-8 JSON body
//! `{model, messages: [{role, content}], temperature: 0}`; the reply is read
//! from the first message content field. Transport failures are retried with
//! exponential backoff (base 0.5 s, factor 2, max 3 attempts by default).

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{
    fingerprint, BackendError, BackendRequest, Cassette, CassetteMode, ProposedCandidate,
    RequestPayload, RewriteBackend,
};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("transport failure: {0}")]
    Failed(String),
}

/// Injectable HTTP layer; replay mode never touches it.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<String, TransportError>;
}

/// Real transport backed by a blocking HTTP client.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<String, TransportError> {
        let mut req = self.client.post(url).json(body);
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let resp = req.send().map_err(|e| TransportError::Failed(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| TransportError::Failed(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Failed(format!("status {status}: {text}")));
        }
        Ok(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub base_ms: u64,
    pub factor: u32,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { base_ms: 500, factor: 2, max_attempts: 3 }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.base_ms * u64::from(self.factor.pow(attempt)))
    }
}

fn default_max_in_flight() -> usize {
    4
}

fn default_max_candidates() -> usize {
    5
}

fn default_timeout_secs() -> u64 {
    30
}

fn default_structure_instruction() -> String {
    "Rewrite the following scene as exactly {frames} frame descriptions, one per line, \
     each formatted as `Frame <k>: <description>`. Describe only the visible state of \
     each moment. Scene: {prompt}"
        .to_string()
}

fn default_structure_retry_suffix() -> String {
    " Reply with exactly {frames} lines and nothing else, each starting with `Frame <k>: `."
        .to_string()
}

fn default_candidates_instruction() -> String {
    "List up to {max} alternative words for `{term}` that keep the meaning of the sentence \
     but read as more ordinary. One alternative per line, nothing else. Sentence: {context}"
        .to_string()
}

/// Remote backend configuration, loadable from TOML. Instruction texts are
/// editable templates with `{prompt}`, `{frames}`, `{term}`, `{context}`,
/// `{max}` placeholders.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding a bearer token, if any.
    #[serde(default)]
    pub bearer_token_env: Option<String>,
    #[serde(default)]
    pub extra_headers: Vec<(String, String)>,
    #[serde(default = "default_structure_instruction")]
    pub structure_instruction: String,
    #[serde(default = "default_structure_retry_suffix")]
    pub structure_retry_suffix: String,
    #[serde(default = "default_candidates_instruction")]
    pub candidates_instruction: String,
    #[serde(default = "default_max_candidates")]
    pub max_candidates: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

impl RemoteConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| BackendError::Unavailable(e.to_string()))
    }

    fn headers(&self) -> Vec<(String, String)> {
        let mut headers = self.extra_headers.clone();
        if let Some(env_name) = &self.bearer_token_env {
            if let Ok(token) = std::env::var(env_name) {
                headers.push(("Authorization".into(), format!("Bearer {token}")));
            }
        }
        headers
    }
}

/// Counting semaphore bounding in-flight transport calls.
struct InFlight {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn new(limit: usize) -> Self {
        Self { slots: Mutex::new(limit.max(1)), freed: Condvar::new() }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut slots = self.slots.lock().unwrap();
        while *slots == 0 {
            slots = self.freed.wait(slots).unwrap();
        }
        *slots -= 1;
        InFlightGuard { pool: self }
    }
}

struct InFlightGuard<'a> {
    pool: &'a InFlight,
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.pool.slots.lock().unwrap() += 1;
        self.pool.freed.notify_one();
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    transport: Arc<dyn Transport>,
    cassette: Option<Mutex<Cassette>>,
    in_flight: InFlight,
    next_request_id: AtomicU64,
}

impl RemoteBackend {
    /// Live backend (record or passthrough depending on the cassette).
    pub fn new(
        config: RemoteConfig,
        transport: Arc<dyn Transport>,
        cassette: Option<Cassette>,
    ) -> Self {
        if let Some(c) = &cassette {
            debug_assert_eq!(c.mode(), CassetteMode::Record);
        }
        let limit = config.max_in_flight;
        Self {
            config,
            transport,
            cassette: cassette.map(Mutex::new),
            in_flight: InFlight::new(limit),
            next_request_id: AtomicU64::new(1),
        }
    }

    /// Replay-only backend: every call must hit the cassette and the
    /// transport is never used.
    pub fn replay(config: RemoteConfig, cassette: Cassette) -> Self {
        debug_assert_eq!(cassette.mode(), CassetteMode::Replay);
        let limit = config.max_in_flight;
        Self {
            config,
            transport: Arc::new(NoTransport),
            cassette: Some(Mutex::new(cassette)),
            in_flight: InFlight::new(limit),
            next_request_id: AtomicU64::new(1),
        }
    }

    fn next_id(&self) -> u64 {
        self.next_request_id.fetch_add(1, Ordering::Relaxed)
    }

    fn instruction_for(&self, payload: &RequestPayload) -> String {
        match payload {
            RequestPayload::Structure { raw, frames, amended } => {
                let mut text = self.config.structure_instruction.clone();
                if *amended {
                    text.push_str(&self.config.structure_retry_suffix);
                }
                text.replace("{frames}", &frames.to_string()).replace("{prompt}", raw)
            }
            RequestPayload::Candidates { term, context } => self
                .config
                .candidates_instruction
                .replace("{max}", &self.config.max_candidates.to_string())
                .replace("{term}", term)
                .replace("{context}", context),
        }
    }

    /// Issues one backend call, honoring the cassette mode.
    pub fn call(&self, request: &BackendRequest) -> Result<String, BackendError> {
        request.validate()?;
        let fp = fingerprint(request);

        if let Some(cassette) = &self.cassette {
            let guard = cassette.lock().unwrap();
            if guard.mode() == CassetteMode::Replay {
                return guard
                    .lookup(&fp)
                    .map(str::to_string)
                    .ok_or(BackendError::CassetteMiss(fp));
            }
            if let Some(reply) = guard.lookup(&fp) {
                return Ok(reply.to_string());
            }
        }

        let reply = self.call_transport(request)?;

        if let Some(cassette) = &self.cassette {
            cassette.lock().unwrap().store(fp, reply.clone())?;
        }
        Ok(reply)
    }

    fn call_transport(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": self.instruction_for(&request.payload)}],
            "temperature": 0,
        });
        let headers = self.config.headers();
        let _slot = self.in_flight.acquire();

        let mut last_err = String::new();
        for attempt in 0..self.config.retry.max_attempts {
            if attempt > 0 {
                std::thread::sleep(self.config.retry.delay(attempt - 1));
            }
            match self.transport.post_json(&self.config.endpoint, &headers, &body) {
                Ok(raw) => return extract_content(&raw),
                Err(TransportError::Failed(msg)) => last_err = msg,
            }
        }
        Err(BackendError::Unavailable(format!(
            "{} after {} attempts",
            last_err, self.config.retry.max_attempts
        )))
    }

    fn parse_candidate_lines(&self, reply: &str, term: &str) -> Vec<ProposedCandidate> {
        reply
            .lines()
            .map(str::trim)
            .map(|l| l.trim_start_matches(['-', '*', '•']).trim())
            .filter(|l| !l.is_empty())
            .filter(|l| l.split_whitespace().count() <= 6)
            .filter(|l| crate::prompt::normalize_term(l) != crate::prompt::normalize_term(term))
            .take(self.config.max_candidates)
            .map(|l| ProposedCandidate { term: l.to_string(), score: None })
            .collect()
    }
}

impl RewriteBackend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn structure(&self, raw: &str, frames: u32, amended: bool) -> Result<String, BackendError> {
        let request = BackendRequest {
            payload: RequestPayload::Structure { raw: raw.to_string(), frames, amended },
            request_id: self.next_id(),
        };
        self.call(&request)
    }

    fn candidates(&self, term: &str, context: &str) -> Result<Vec<ProposedCandidate>, BackendError> {
        let request = BackendRequest {
            payload: RequestPayload::Candidates {
                term: term.to_string(),
                context: context.to_string(),
            },
            request_id: self.next_id(),
        };
        let reply = self.call(&request)?;
        Ok(self.parse_candidate_lines(&reply, term))
    }
}

/// Transport that fails on use; replay mode must never reach it.
struct NoTransport;

impl Transport for NoTransport {
    fn post_json(&self, _: &str, _: &[(String, String)], _: &Value) -> Result<String, TransportError> {
        Err(TransportError::Failed("network use in replay mode".into()))
    }
}

/// Pulls the reply text out of a chat-style response body: the first
/// message content field found, or the raw body when it is not JSON.
fn extract_content(raw: &str) -> Result<String, BackendError> {
    let Ok(value) = serde_json::from_str::<Value>(raw) else {
        return Ok(raw.to_string());
    };
    if let Some(content) = value
        .pointer("/choices/0/message/content")
        .or_else(|| value.pointer("/messages/0/content"))
        .or_else(|| value.pointer("/content"))
        .and_then(Value::as_str)
    {
        return Ok(content.to_string());
    }
    Err(BackendError::Unavailable("reply has no message content field".into()))
}
