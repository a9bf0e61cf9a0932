//! Sensitive-term lexicon and explicitness risk scoring.
//!
//! The lexicon maps normalized terms (single- or multi-unit phrases) to an
//! explicitness score in `[0, 1]` and a list of covert candidate
//! alternatives. Matching against token sequences is longest-match,
//! left-to-right, non-overlapping; prompt risk is the sum of matched span
//! scores, counted per occurrence.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::{normalize_term, TokenSequence};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse lexicon file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("term `{term}`: score {score} outside [0, 1]")]
    ScoreOutOfRange { term: String, score: Scalar },
    #[error("term `{term}`: empty candidate term")]
    EmptyCandidate { term: String },
    #[error("lexicon entry key is empty after normalization")]
    EmptyTerm,
}

/// A covert alternative for a sensitive term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub term: String,
    pub score: Scalar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub score: Scalar,
    #[serde(default)]
    pub candidates: Vec<Candidate>,
}

/// Sensitive-term set with explicitness scores and covert candidates.
///
/// File format: UTF-8 JSON
/// `{name, version, entries: {term: {score, candidates: [{term, score}]}}}`.
///
/// The scoring domain covers the entries plus every candidate term (at its
/// candidate score; an explicit entry overrides), so substituted text keeps
/// a nonzero, strictly reduced risk instead of dropping off the scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lexicon {
    pub name: String,
    pub version: String,
    entries: BTreeMap<String, LexiconEntry>,
    #[serde(skip)]
    scoring: BTreeMap<String, Scalar>,
    #[serde(skip)]
    max_phrase_units: usize,
}

impl Lexicon {
    pub fn new(
        name: impl Into<String>,
        version: impl Into<String>,
        entries: impl IntoIterator<Item = (String, LexiconEntry)>,
    ) -> Result<Self, LexiconError> {
        let entries: BTreeMap<String, LexiconEntry> = entries
            .into_iter()
            .map(|(term, e)| (normalize_term(&term), e))
            .collect();
        let mut lex = Self {
            name: name.into(),
            version: version.into(),
            entries,
            scoring: BTreeMap::new(),
            max_phrase_units: 0,
        };
        lex.validate()?;
        Ok(lex)
    }

    pub fn from_json(json: &str) -> Result<Self, LexiconError> {
        let mut lex: Lexicon = serde_json::from_str(json)?;
        lex.entries = lex
            .entries
            .into_iter()
            .map(|(term, e)| (normalize_term(&term), e))
            .collect();
        lex.validate()?;
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&mut self) -> Result<(), LexiconError> {
        self.max_phrase_units = 0;
        self.scoring.clear();
        for (term, entry) in &self.entries {
            if term.is_empty() {
                return Err(LexiconError::EmptyTerm);
            }
            if !(0.0..=1.0).contains(&entry.score) {
                return Err(LexiconError::ScoreOutOfRange { term: term.clone(), score: entry.score });
            }
            for c in &entry.candidates {
                if c.term.trim().is_empty() {
                    return Err(LexiconError::EmptyCandidate { term: term.clone() });
                }
                if !(0.0..=1.0).contains(&c.score) {
                    return Err(LexiconError::ScoreOutOfRange { term: c.term.clone(), score: c.score });
                }
                self.scoring.entry(normalize_term(&c.term)).or_insert(c.score);
            }
        }
        // entries override candidate scores
        for (term, entry) in &self.entries {
            self.scoring.insert(term.clone(), entry.score);
        }
        for term in self.scoring.keys() {
            let units = term.split(' ').count();
            self.max_phrase_units = self.max_phrase_units.max(units);
        }
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, LexiconEntry> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Looks up a term by normalized form.
    pub fn get(&self, term: &str) -> Option<&LexiconEntry> {
        self.entries.get(&normalize_term(term))
    }

    /// Explicitness score of a term; unknown terms default to 0 (presumed
    /// benign under the attacker model).
    pub fn score_or_benign(&self, term: &str) -> Scalar {
        self.scoring.get(&normalize_term(term)).copied().unwrap_or(0.0)
    }

    /// Finds sensitive spans in a token sequence: longest match first,
    /// left-to-right, non-overlapping.
    pub fn find_spans(&self, tokens: &TokenSequence) -> Vec<SensitiveSpan> {
        let normalized = tokens.normalized();
        let mut spans = Vec::new();
        let mut i = 0;
        while i < normalized.len() {
            let max_len = self.max_phrase_units.min(normalized.len() - i);
            let mut matched = None;
            for len in (1..=max_len).rev() {
                let phrase = normalized[i..i + len].join(" ");
                if let Some(&score) = self.scoring.get(&phrase) {
                    matched = Some((len, phrase, score));
                    break;
                }
            }
            match matched {
                Some((len, term, score)) => {
                    spans.push(SensitiveSpan { start: i, len, term, score });
                    i += len;
                }
                None => i += 1,
            }
        }
        spans
    }
}

/// A matched sensitive span over a token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitiveSpan {
    /// Unit offset of the span start.
    pub start: usize,
    /// Span length in units (1 for single terms).
    pub len: usize,
    /// Normalized lexicon key that matched.
    pub term: String,
    pub score: Scalar,
}

/// Per-unit membership/score breakdown plus the aggregate risk.
///
/// For multi-unit spans every member unit is marked, and the span score is
/// carried by the first unit so that the total stays the plain sum of
/// matched span scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub per_unit: Vec<UnitRisk>,
    pub total: Scalar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRisk {
    pub unit: String,
    pub sensitive: bool,
    pub score: Scalar,
}

/// Scores a token sequence against the lexicon: `total = Σ span scores`,
/// repeated terms counted per occurrence.
pub fn risk_score(tokens: &TokenSequence, lexicon: &Lexicon) -> RiskReport {
    let spans = lexicon.find_spans(tokens);
    let mut per_unit: Vec<UnitRisk> = tokens
        .texts()
        .map(|t| UnitRisk { unit: t.to_string(), sensitive: false, score: 0.0 })
        .collect();
    let mut total = 0.0;
    for span in &spans {
        for offset in 0..span.len {
            per_unit[span.start + offset].sensitive = true;
        }
        per_unit[span.start].score = span.score;
        total += span.score;
    }
    RiskReport { per_unit, total }
}

/// Risk of a plain text string (tokenize + score).
pub fn text_risk(text: &str, lexicon: &Lexicon) -> Scalar {
    risk_score(&crate::prompt::tokenize(text), lexicon).total
}
