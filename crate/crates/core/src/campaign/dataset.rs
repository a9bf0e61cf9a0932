//! Dataset ingestion: UTF-8 JSONL, one `{id, category, prompt}` object per
//! line, categories restricted to the known label set.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::Category;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed dataset line: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: duplicate prompt id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: unknown category `{category}`")]
    UnknownCategory { line: usize, category: String },
    #[error("dataset contains no records")]
    EmptySet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawLine {
    id: String,
    category: String,
    prompt: String,
}

/// One ingested prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetRecord {
    pub id: String,
    pub category: Category,
    pub prompt: String,
}

/// Reads and validates a dataset file. Blank lines are rejected as
/// malformed except a single trailing newline.
pub fn ingest_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawLine = serde_json::from_str(line)
            .map_err(|e| DatasetError::MalformedLine { line: line_no, message: e.to_string() })?;
        let category = Category::parse_id(&raw.category).ok_or_else(|| {
            DatasetError::UnknownCategory { line: line_no, category: raw.category.clone() }
        })?;
        if !seen.insert(raw.id.clone()) {
            return Err(DatasetError::DuplicateId { line: line_no, id: raw.id });
        }
        if raw.prompt.trim().is_empty() {
            return Err(DatasetError::MalformedLine {
                line: line_no,
                message: "empty prompt".into(),
            });
        }
        records.push(DatasetRecord { id: raw.id, category, prompt: raw.prompt });
    }
    if records.is_empty() {
        return Err(DatasetError::EmptySet);
    }
    Ok(records)
}
