//! Covert substitution: mark sensitive spans, gather covert alternatives
//! from a rewriter backend, and swap in the least-explicit valid candidate.
//!
//! Substitution is budgeted. Spans are processed left-to-right within a
//! frame and frames in a fixed order (boundary: first, last, then middle;
//! full prompts: index order); once the budget is spent the remaining spans
//! fall back to their original surface form. The budget is what makes the
//! pipeline order non-commutative when substitution happens before boundary
//! extraction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, RewriteBackend};
use crate::lexicon::{text_risk, Candidate, Lexicon, SensitiveSpan};
use crate::prompt::{normalize_term, tokenize, BoundaryPrompt, FrameSpec, TemporalPrompt, TokenSequence};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum CsmError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] crate::prompt::PromptError),
}

/// Substitution budget: maximum number of performed substitutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Limited(u32),
    Unlimited,
}

impl Budget {
    /// Default models rewrite-quality degradation on long prompts.
    pub const DEFAULT: Budget = Budget::Limited(4);

    fn available(&self, spent: u32) -> bool {
        match self {
            Budget::Limited(n) => spent < *n,
            Budget::Unlimited => true,
        }
    }
}

impl Serialize for Budget {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Budget::Limited(n) => ser.serialize_u32(*n),
            Budget::Unlimited => ser.serialize_str("unlimited"),
        }
    }
}

impl<'de> Deserialize<'de> for Budget {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let v = serde_json::Value::deserialize(de)?;
        match v {
            serde_json::Value::Number(n) => n
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .map(Budget::Limited)
                .ok_or_else(|| D::Error::custom("budget must be a small non-negative integer")),
            serde_json::Value::String(s) if s == "unlimited" => Ok(Budget::Unlimited),
            other => Err(D::Error::custom(format!("invalid budget: {other}"))),
        }
    }
}

/// One processed sensitive span: what was found, what it became.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionRecord {
    pub frame_index: u32,
    /// Unit offset of the span within its frame.
    pub unit_position: usize,
    /// Normalized lexicon term that matched.
    pub original: String,
    pub original_score: Scalar,
    pub chosen: String,
    pub chosen_score: Scalar,
    pub candidates_considered: Vec<Candidate>,
    pub fallback: bool,
}

/// A boundary prompt after covert substitution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewrittenPrompt {
    pub boundary: BoundaryPrompt,
    pub records: Vec<SubstitutionRecord>,
    pub risk_before: Scalar,
    pub risk_after: Scalar,
}

/// A full temporal prompt after covert substitution over every frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewrittenTemporal {
    pub prompt: TemporalPrompt,
    pub records: Vec<SubstitutionRecord>,
    pub risk_before: Scalar,
    pub risk_after: Scalar,
}

/// Spans where the lexicon membership indicator is 1, under the
/// longest-match rule.
pub fn mark_sensitive(tokens: &TokenSequence, lexicon: &Lexicon) -> Vec<SensitiveSpan> {
    lexicon.find_spans(tokens)
}

/// Fetches covert alternatives for a term, drops degenerate entries
/// (empty, whitespace-only, identical to the term), and scores unscored
/// candidates by lexicon lookup (unknown terms score 0).
pub fn propose_candidates(
    term: &str,
    context: &str,
    backend: &dyn RewriteBackend,
    lexicon: &Lexicon,
) -> Result<Vec<Candidate>, BackendError> {
    let proposed = backend.candidates(term, context)?;
    let term_norm = normalize_term(term);
    Ok(proposed
        .into_iter()
        .filter(|c| !c.term.trim().is_empty())
        .filter(|c| normalize_term(&c.term) != term_norm)
        .map(|c| Candidate {
            score: c.score.unwrap_or_else(|| lexicon.score_or_benign(&c.term)),
            term: c.term,
        })
        .collect())
}

/// Picks the least-explicit candidate strictly below the original score.
/// Ties break on the lexicographic order of the normalized term; `None`
/// means fallback to the original.
pub fn select_substitute(original_score: Scalar, candidates: &[Candidate]) -> Option<Candidate> {
    candidates
        .iter()
        .filter(|c| c.score < original_score)
        .min_by(|a, b| {
            a.score
                .partial_cmp(&b.score)
                .unwrap()
                .then_with(|| normalize_term(&a.term).cmp(&normalize_term(&b.term)))
        })
        .cloned()
}

/// Shared budget and backend-outage accounting across one rewrite.
struct SubstitutionPass<'a> {
    lexicon: &'a Lexicon,
    backend: &'a dyn RewriteBackend,
    budget: Budget,
    spent: u32,
    attempts: usize,
    backend_failures: usize,
    records: Vec<SubstitutionRecord>,
}

impl<'a> SubstitutionPass<'a> {
    fn new(lexicon: &'a Lexicon, backend: &'a dyn RewriteBackend, budget: Budget) -> Self {
        Self { lexicon, backend, budget, spent: 0, attempts: 0, backend_failures: 0, records: Vec::new() }
    }

    /// Rewrites one frame text, consuming budget. Returns the new text.
    fn rewrite_frame(&mut self, frame: &FrameSpec) -> String {
        let tokens = tokenize(&frame.text);
        let spans = self.lexicon.find_spans(&tokens);
        if spans.is_empty() {
            return frame.text.clone();
        }

        let units: Vec<&str> = tokens.texts().collect();
        let mut out: Vec<String> = Vec::with_capacity(units.len());
        let mut cursor = 0;
        let mut changed = false;

        for span in &spans {
            out.extend(units[cursor..span.start].iter().map(|s| s.to_string()));
            cursor = span.start + span.len;

            let record = self.process_span(frame.index, span, &frame.text);
            if record.fallback {
                out.extend(units[span.start..cursor].iter().map(|s| s.to_string()));
            } else {
                out.push(record.chosen.clone());
                changed = true;
            }
            self.records.push(record);
        }
        out.extend(units[cursor..].iter().map(|s| s.to_string()));

        if changed {
            out.join(" ")
        } else {
            frame.text.clone()
        }
    }

    fn process_span(&mut self, frame_index: u32, span: &SensitiveSpan, context: &str) -> SubstitutionRecord {
        let fallback = |candidates: Vec<Candidate>| SubstitutionRecord {
            frame_index,
            unit_position: span.start,
            original: span.term.clone(),
            original_score: span.score,
            chosen: span.term.clone(),
            chosen_score: span.score,
            candidates_considered: candidates,
            fallback: true,
        };

        if !self.budget.available(self.spent) {
            return fallback(Vec::new());
        }

        self.attempts += 1;
        let candidates = match propose_candidates(&span.term, context, self.backend, self.lexicon) {
            Ok(c) => c,
            Err(BackendError::Unavailable(_)) | Err(BackendError::CassetteMiss(_)) => {
                self.backend_failures += 1;
                return fallback(Vec::new());
            }
            Err(_) => {
                self.backend_failures += 1;
                return fallback(Vec::new());
            }
        };

        match select_substitute(span.score, &candidates) {
            Some(chosen) => {
                self.spent += 1;
                SubstitutionRecord {
                    frame_index,
                    unit_position: span.start,
                    original: span.term.clone(),
                    original_score: span.score,
                    chosen: chosen.term,
                    chosen_score: chosen.score,
                    candidates_considered: candidates,
                    fallback: false,
                }
            }
            None => fallback(candidates),
        }
    }

    /// A backend outage is fatal only when no span could be attempted at all.
    fn check_outage(&self) -> Result<(), CsmError> {
        if self.attempts > 0 && self.backend_failures == self.attempts {
            return Err(CsmError::Backend(BackendError::Unavailable(
                "no substitution could be attempted".into(),
            )));
        }
        Ok(())
    }
}

/// Applies covert substitution to a boundary prompt. Frames are processed
/// first, last, then middle (when present) under one shared budget.
pub fn apply_csm(
    bp: &BoundaryPrompt,
    lexicon: &Lexicon,
    backend: &dyn RewriteBackend,
    budget: Budget,
) -> Result<RewrittenPrompt, CsmError> {
    let risk_before: Scalar = bp
        .frames_in_processing_order()
        .iter()
        .map(|f| text_risk(&f.text, lexicon))
        .sum();

    let mut pass = SubstitutionPass::new(lexicon, backend, budget);
    let first_text = pass.rewrite_frame(&bp.first);
    let last_text = pass.rewrite_frame(&bp.last);
    let middle_text = bp.middle.as_ref().map(|m| pass.rewrite_frame(m));
    pass.check_outage()?;

    let mut boundary = BoundaryPrompt::new(
        FrameSpec { index: bp.first.index, text: first_text },
        FrameSpec { index: bp.last.index, text: last_text },
        bp.origin_frames,
    );
    if let (Some(m), Some(text)) = (&bp.middle, middle_text) {
        boundary = boundary.with_middle(FrameSpec { index: m.index, text });
    }

    let risk_after: Scalar = boundary
        .frames_in_processing_order()
        .iter()
        .map(|f| text_risk(&f.text, lexicon))
        .sum();

    Ok(RewrittenPrompt { boundary, records: pass.records, risk_before, risk_after })
}

/// Applies the same substitution loop over all frames of a temporal prompt,
/// in index order, under one shared budget.
pub fn apply_csm_full(
    prompt: &TemporalPrompt,
    lexicon: &Lexicon,
    backend: &dyn RewriteBackend,
    budget: Budget,
) -> Result<RewrittenTemporal, CsmError> {
    let risk_before: Scalar = prompt
        .frames()
        .iter()
        .map(|f| text_risk(&f.text, lexicon))
        .sum();

    let mut pass = SubstitutionPass::new(lexicon, backend, budget);
    let texts: Vec<String> = prompt.frames().iter().map(|f| pass.rewrite_frame(f)).collect();
    pass.check_outage()?;

    let rewritten = prompt.with_frame_texts(texts)?;
    let risk_after: Scalar = rewritten
        .frames()
        .iter()
        .map(|f| text_risk(&f.text, lexicon))
        .sum();

    Ok(RewrittenTemporal { prompt: rewritten, records: pass.records, risk_before, risk_after })
}
