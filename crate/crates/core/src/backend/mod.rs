//! Pluggable rewriter backends used for prompt structuring and covert
//! candidate proposal: a deterministic lexicon-driven backend for offline
//! runs, and a generic chat-style HTTP backend with record/replay cassettes.

mod cassette;
mod lexicon_backend;
mod remote;

pub use cassette::{fingerprint, Cassette, CassetteEntry, CassetteMode};
pub use lexicon_backend::{LexiconBackend, StructureTemplate, StructureTemplates};
pub use remote::{HttpTransport, RemoteBackend, RemoteConfig, RetryPolicy, Transport, TransportError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

/// Environment variable selecting the backend mode.
pub const BACKEND_MODE_ENV: &str = "TFM_BACKEND_MODE";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("cassette miss for fingerprint {0}")]
    CassetteMiss(String),
    #[error("cassette io: {0}")]
    CassetteIo(#[from] std::io::Error),
    #[error("invalid backend mode `{0}` (expected record|replay|passthrough|lexicon)")]
    InvalidMode(String),
    #[error("backend request has an empty payload")]
    EmptyPayload,
}

/// How backend calls are satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    /// Call the remote endpoint and record replies into the cassette.
    Record,
    /// Serve replies from the cassette only; any network use is a bug.
    Replay,
    /// Call the remote endpoint without recording.
    Passthrough,
    /// Use the deterministic lexicon backend; no remote involved.
    #[default]
    Lexicon,
}

impl BackendMode {
    pub fn parse(s: &str) -> Result<Self, BackendError> {
        match s {
            "record" => Ok(Self::Record),
            "replay" => Ok(Self::Replay),
            "passthrough" => Ok(Self::Passthrough),
            "lexicon" => Ok(Self::Lexicon),
            other => Err(BackendError::InvalidMode(other.to_string())),
        }
    }

    /// Reads `TFM_BACKEND_MODE`; `None` when unset.
    pub fn from_env() -> Result<Option<Self>, BackendError> {
        match std::env::var(BACKEND_MODE_ENV) {
            Ok(v) => Self::parse(&v).map(Some),
            Err(_) => Ok(None),
        }
    }
}

/// One backend call, as fingerprinted for cassettes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    #[serde(flatten)]
    pub payload: RequestPayload,
    /// Unique per campaign; excluded from the fingerprint.
    pub request_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RequestPayload {
    Structure { raw: String, frames: u32, amended: bool },
    Candidates { term: String, context: String },
}

impl BackendRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        let empty = match &self.payload {
            RequestPayload::Structure { raw, .. } => raw.trim().is_empty(),
            RequestPayload::Candidates { term, .. } => term.trim().is_empty(),
        };
        if empty {
            return Err(BackendError::EmptyPayload);
        }
        Ok(())
    }
}

/// A candidate proposed by a backend; the score is present only when the
/// backend scores its own candidates (the lexicon backend does, remote
/// replies are scored by lexicon lookup downstream).
#[derive(Debug, Clone, PartialEq)]
pub struct ProposedCandidate {
    pub term: String,
    pub score: Option<Scalar>,
}

/// A rewriter backend: structures raw prompts into frame-marker text and
/// proposes covert alternatives for sensitive terms.
pub trait RewriteBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Returns frame-marker text with `frames` lines for the raw prompt.
    /// `amended` marks the one retry issued after a malformed reply.
    fn structure(&self, raw: &str, frames: u32, amended: bool) -> Result<String, BackendError>;

    /// Returns covert alternatives for a sensitive term in context.
    fn candidates(&self, term: &str, context: &str) -> Result<Vec<ProposedCandidate>, BackendError>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_parsing() {
        assert_eq!(BackendMode::parse("replay").unwrap(), BackendMode::Replay);
        assert!(matches!(BackendMode::parse("bogus"), Err(BackendError::InvalidMode(_))));
    }

    #[test]
    fn request_payload_validation() {
        let ok = BackendRequest {
            payload: RequestPayload::Candidates { term: "smoke".into(), context: "x".into() },
            request_id: 1,
        };
        assert!(ok.validate().is_ok());
        let bad = BackendRequest {
            payload: RequestPayload::Structure { raw: "  ".into(), frames: 2, amended: false },
            request_id: 2,
        };
        assert!(matches!(bad.validate(), Err(BackendError::EmptyPayload)));
    }
}
