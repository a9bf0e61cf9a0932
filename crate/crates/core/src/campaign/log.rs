//! Append-only result log: JSONL with a provenance header line followed by
//! one attack record per line. Records are idempotently keyed by
//! `(prompt_id, variant, profile, seed)`; appending a known key is a no-op.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{AttackRecord, Variant};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log io: {0}")]
    Io(#[from] std::io::Error),
    #[error("log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("log belongs to a different campaign (config hash {found}, expected {expected})")]
    ForeignLog { found: String, expected: String },
}

/// Versions of everything that shaped the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub lexicon_version: String,
    pub scenario_version: String,
    pub base_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Provenance(Provenance),
    Attack(AttackRecord),
}

type Key = (String, Variant, String, u64);

/// Writer half of the result log; the single serialization point of a
/// campaign run. Each append is flushed before returning.
pub struct ResultLog {
    path: PathBuf,
    writer: Mutex<BufWriter<File>>,
    keys: Mutex<HashSet<Key>>,
}

impl ResultLog {
    /// Opens (or creates) a log for the given provenance. An existing log
    /// written under a different config hash is refused; otherwise its
    /// records are indexed so completed keys can be skipped.
    pub fn open(path: impl AsRef<Path>, provenance: &Provenance) -> Result<Self, LogError> {
        let path = path.as_ref().to_path_buf();
        let mut keys = HashSet::new();
        let mut needs_header = true;
        if path.exists() {
            let (existing, records) = read_log(&path)?;
            if let Some(existing) = existing {
                if existing.config_hash != provenance.config_hash {
                    return Err(LogError::ForeignLog {
                        found: existing.config_hash,
                        expected: provenance.config_hash.clone(),
                    });
                }
                needs_header = false;
            }
            for r in records {
                keys.insert(r.key());
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut writer = BufWriter::new(file);
        if needs_header {
            let line = serde_json::to_string(&LogLine::Provenance(provenance.clone()))
                .expect("provenance serializes");
            writeln!(writer, "{line}")?;
            writer.flush()?;
        }
        Ok(Self { path, writer: Mutex::new(writer), keys: Mutex::new(keys) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn completed(&self, key: &Key) -> bool {
        self.keys.lock().unwrap().contains(key)
    }

    pub fn completed_count(&self) -> usize {
        self.keys.lock().unwrap().len()
    }

    /// Appends one record unless its key is already present. Returns whether
    /// the record was written.
    pub fn append(&self, record: &AttackRecord) -> Result<bool, LogError> {
        let key = record.key();
        {
            let mut keys = self.keys.lock().unwrap();
            if !keys.insert(key) {
                return Ok(false);
            }
        }
        let line = serde_json::to_string(&LogLine::Attack(record.clone())).expect("record serializes");
        let mut writer = self.writer.lock().unwrap();
        writeln!(writer, "{line}")?;
        writer.flush()?;
        Ok(true)
    }
}

/// Reads a log back: the provenance header (if any) and all attack records.
pub fn read_log(path: impl AsRef<Path>) -> Result<(Option<Provenance>, Vec<AttackRecord>), LogError> {
    let text = std::fs::read_to_string(path)?;
    let mut provenance = None;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(line)
            .map_err(|e| LogError::Corrupt { line: idx + 1, message: e.to_string() })?;
        match parsed {
            LogLine::Provenance(p) => provenance = Some(p),
            LogLine::Attack(r) => records.push(r),
        }
    }
    Ok((provenance, records))
}
