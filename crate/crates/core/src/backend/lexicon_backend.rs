//! Deterministic lexicon-driven backend for offline runs and tests.
//!
//! Structuring is a template expansion keyed on trigger phrases; covert
//! candidates echo the lexicon's configured candidate lists. Same input,
//! same output, no network.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BackendError, ProposedCandidate, RewriteBackend};
use crate::lexicon::Lexicon;
use crate::prompt::normalize_term;

/// A scenario expansion: the first frame gets `initial`, the last frame
/// `last`, and intermediate frames walk `progression` (the final clause
/// repeats when more intermediates are needed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureTemplate {
    /// Normalized substring of the raw prompt that selects this template.
    pub trigger: String,
    pub initial: String,
    pub last: String,
    #[serde(default)]
    pub progression: Vec<String>,
}

/// Editable template set, shipped as a TOML file with `[[templates]]` entries.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StructureTemplates {
    #[serde(default)]
    pub templates: Vec<StructureTemplate>,
}

impl StructureTemplates {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| BackendError::Unavailable(e.to_string()))
    }

    fn find(&self, raw: &str) -> Option<&StructureTemplate> {
        let raw_norm = normalize_term(raw);
        self.templates
            .iter()
            .find(|t| raw_norm.contains(&normalize_term(&t.trigger)))
    }
}

pub struct LexiconBackend {
    lexicon: Arc<Lexicon>,
    templates: StructureTemplates,
}

impl LexiconBackend {
    pub fn new(lexicon: Arc<Lexicon>, templates: StructureTemplates) -> Self {
        Self { lexicon, templates }
    }

    pub fn without_templates(lexicon: Arc<Lexicon>) -> Self {
        Self { lexicon, templates: StructureTemplates::default() }
    }

    fn expand(template: Option<&StructureTemplate>, raw: &str, frames: u32) -> String {
        let neutral_initial;
        let neutral_last;
        let neutral_progression = vec!["the scene progresses".to_string()];
        let (initial, last, progression) = match template {
            Some(t) => (&t.initial, &t.last, &t.progression),
            None => {
                neutral_initial = format!("the opening state of: {raw}");
                neutral_last = format!("the final state of: {raw}");
                (&neutral_initial, &neutral_last, &neutral_progression)
            }
        };
        let mut lines = Vec::with_capacity(frames as usize);
        lines.push(format!("Frame 1: {initial}"));
        for t in 2..frames {
            let clause = progression
                .get((t - 2) as usize)
                .or_else(|| progression.last())
                .map(String::as_str)
                .unwrap_or("the scene progresses");
            lines.push(format!("Frame {t}: {clause}"));
        }
        lines.push(format!("Frame {frames}: {last}"));
        lines.join("\n")
    }
}

impl RewriteBackend for LexiconBackend {
    fn name(&self) -> &str {
        "lexicon"
    }

    fn structure(&self, raw: &str, frames: u32, _amended: bool) -> Result<String, BackendError> {
        debug_assert!(frames >= 2);
        Ok(Self::expand(self.templates.find(raw), raw, frames))
    }

    fn candidates(&self, term: &str, _context: &str) -> Result<Vec<ProposedCandidate>, BackendError> {
        Ok(self
            .lexicon
            .get(term)
            .map(|e| {
                e.candidates
                    .iter()
                    .map(|c| ProposedCandidate { term: c.term.clone(), score: Some(c.score) })
                    .collect()
            })
            .unwrap_or_default())
    }
}
