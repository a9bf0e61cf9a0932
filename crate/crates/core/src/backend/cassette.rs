//! Record/replay cassettes for remote backend calls.
//!
//! A cassette is an ordered list of `(fingerprint, reply)` pairs persisted
//! as a UTF-8 JSON array. Fingerprints are SHA-256 hashes of canonicalized
//! requests (key-sorted JSON, whitespace-normalized payload strings), so
//! semantically identical requests collide regardless of formatting.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, BackendRequest, RequestPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CassetteMode {
    Record,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub fingerprint: String,
    pub reply: String,
}

#[derive(Debug)]
pub struct Cassette {
    entries: Vec<CassetteEntry>,
    index: HashMap<String, usize>,
    mode: CassetteMode,
    path: Option<PathBuf>,
}

impl Cassette {
    /// Opens an existing cassette for replay.
    pub fn replay(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(&path)?;
        let entries: Vec<CassetteEntry> =
            serde_json::from_str(&text).map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.fingerprint.clone(), i))
            .collect();
        Ok(Self { entries, index, mode: CassetteMode::Replay, path: None })
    }

    /// Creates (or appends to) a cassette in record mode, persisted at `path`.
    pub fn record(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref().to_path_buf();
        let entries: Vec<CassetteEntry> = if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            serde_json::from_str(&text).map_err(|e| BackendError::Unavailable(e.to_string()))?
        } else {
            Vec::new()
        };
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.fingerprint.clone(), i))
            .collect();
        Ok(Self { entries, index, mode: CassetteMode::Record, path: Some(path) })
    }

    /// In-memory cassette, useful for tests.
    pub fn in_memory(mode: CassetteMode, entries: Vec<CassetteEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.fingerprint.clone(), i))
            .collect();
        Self { entries, index, mode, path: None }
    }

    pub fn mode(&self) -> CassetteMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, fingerprint: &str) -> Option<&str> {
        self.index.get(fingerprint).map(|&i| self.entries[i].reply.as_str())
    }

    /// Appends an entry and persists the cassette when backed by a file.
    pub fn store(&mut self, fingerprint: String, reply: String) -> Result<(), BackendError> {
        self.index.insert(fingerprint.clone(), self.entries.len());
        self.entries.push(CassetteEntry { fingerprint, reply });
        self.persist()
    }

    fn persist(&self) -> Result<(), BackendError> {
        if let Some(path) = &self.path {
            let text = serde_json::to_string_pretty(&self.entries)
                .map_err(|e| BackendError::Unavailable(e.to_string()))?;
            std::fs::write(path, text)?;
        }
        Ok(())
    }
}

fn squash_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Content fingerprint of a request: SHA-256 over canonical JSON with
/// whitespace-normalized strings. The request id never participates.
pub fn fingerprint(request: &BackendRequest) -> String {
    let canonical = match &request.payload {
        RequestPayload::Structure { raw, frames, amended } => serde_json::json!({
            "kind": "structure",
            "raw": squash_ws(raw),
            "frames": frames,
            "amended": amended,
        }),
        RequestPayload::Candidates { term, context } => serde_json::json!({
            "kind": "candidates",
            "term": squash_ws(term),
            "context": squash_ws(context),
        }),
    };
    // serde_json maps are key-sorted by default, so this is canonical.
    let bytes = serde_json::to_vec(&canonical).expect("canonical json");
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}
