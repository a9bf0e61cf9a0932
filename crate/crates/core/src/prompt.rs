//! Frame-structured prompts: parsing, rendering, and unit tokenization.
//!
//! A temporal prompt describes a video as an ordered list of per-frame
//! descriptions in the line format `Frame <k>: <text>`. The boundary form
//! keeps only the first and last frame (plus an optional explicit middle
//! frame) and renders back to plain text through a named template.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("line {line}: frame marker has no description")]
    MalformedFrameMarker { line: usize },
    #[error("no frame marker lines found")]
    EmptyPrompt,
    #[error("unknown render template `{0}`")]
    UnknownTemplate(String),
    #[error("frame text is empty")]
    EmptyFrameText,
    #[error("prompt has {found} frames, need at least {need}")]
    TooFewFrames { need: u32, found: u32 },
}

/// One frame description inside a temporal prompt. Index is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub index: u32,
    pub text: String,
}

impl FrameSpec {
    pub fn new(index: u32, text: impl Into<String>) -> Result<Self, PromptError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(PromptError::EmptyFrameText);
        }
        assert!(index >= 1, "frame indices are 1-based");
        Ok(Self { index, text })
    }
}

/// A prompt structured into `T` contiguous frames (indices exactly `1..=T`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalPrompt {
    pub scene_id: String,
    pub category: String,
    frames: Vec<FrameSpec>,
}

impl TemporalPrompt {
    /// Builds a prompt from ordered frames, renumbering indices to `1..=T`.
    pub fn new(
        scene_id: impl Into<String>,
        category: impl Into<String>,
        frames: Vec<FrameSpec>,
    ) -> Result<Self, PromptError> {
        if frames.is_empty() {
            return Err(PromptError::EmptyPrompt);
        }
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| FrameSpec { index: i as u32 + 1, text: f.text })
            .collect();
        Ok(Self { scene_id: scene_id.into(), category: category.into(), frames })
    }

    pub fn total_frames(&self) -> u32 {
        self.frames.len() as u32
    }

    pub fn frames(&self) -> &[FrameSpec] {
        &self.frames
    }

    /// 1-based frame lookup.
    pub fn frame(&self, index: u32) -> &FrameSpec {
        &self.frames[index as usize - 1]
    }

    pub fn with_frame_texts(&self, texts: Vec<String>) -> Result<Self, PromptError> {
        assert_eq!(texts.len(), self.frames.len());
        let frames = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| FrameSpec::new(i as u32 + 1, t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { scene_id: self.scene_id.clone(), category: self.category.clone(), frames })
    }

    /// Renders back to the `Frame <k>: <text>` line format.
    pub fn to_marker_text(&self) -> String {
        self.frames
            .iter()
            .map(|f| format!("Frame {}: {}", f.index, f.text))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Boundary-only specification: first and last frame of a source prompt,
/// with an optional explicit middle frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryPrompt {
    pub first: FrameSpec,
    pub last: FrameSpec,
    pub middle: Option<FrameSpec>,
    /// Frame count of the source prompt.
    pub origin_frames: u32,
}

impl BoundaryPrompt {
    pub fn new(first: FrameSpec, last: FrameSpec, origin_frames: u32) -> Self {
        debug_assert_eq!(first.index, 1);
        debug_assert_eq!(last.index, origin_frames);
        debug_assert!(origin_frames >= 2);
        Self { first, last, middle: None, origin_frames }
    }

    pub fn with_middle(mut self, middle: FrameSpec) -> Self {
        debug_assert!(middle.index > 1 && middle.index < self.origin_frames);
        self.middle = Some(middle);
        self
    }

    /// Frames in render/processing order: first, last, then middle if present.
    pub fn frames_in_processing_order(&self) -> Vec<&FrameSpec> {
        let mut v = vec![&self.first, &self.last];
        if let Some(m) = &self.middle {
            v.push(m);
        }
        v
    }
}

static FRAME_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*Frame\s+(\d+)\s*:\s*(.*)$").unwrap());

/// Parses frame-marker formatted text into a [`TemporalPrompt`].
///
/// Non-marker lines are ignored; marker indices are renumbered to a
/// contiguous `1..=T` preserving line order.
pub fn parse_temporal(
    text: &str,
    scene_id: &str,
    category: &str,
) -> Result<TemporalPrompt, PromptError> {
    let mut frames = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if let Some(caps) = FRAME_MARKER.captures(line) {
            let desc = caps.get(2).unwrap().as_str().trim();
            if desc.is_empty() {
                return Err(PromptError::MalformedFrameMarker { line: line_no + 1 });
            }
            frames.push(FrameSpec { index: frames.len() as u32 + 1, text: desc.to_string() });
        }
    }
    if frames.is_empty() {
        return Err(PromptError::EmptyPrompt);
    }
    TemporalPrompt::new(scene_id, category, frames)
}

/// Render template identifiers accepted by [`render_boundary`].
pub const DEFAULT_TEMPLATE: &str = "default";
pub const BARE_TEMPLATE: &str = "bare";

/// Renders a boundary prompt to plain text via a named template.
///
/// The default template emits `First frame: {first}. Last frame: {last}.`
/// with a `Middle frame: {middle}.` clause inserted when present.
pub fn render_boundary(bp: &BoundaryPrompt, template: &str) -> Result<String, PromptError> {
    match template {
        DEFAULT_TEMPLATE => {
            let mut out = format!("First frame: {}.", bp.first.text);
            if let Some(m) = &bp.middle {
                out.push_str(&format!(" Middle frame: {}.", m.text));
            }
            out.push_str(&format!(" Last frame: {}.", bp.last.text));
            Ok(out)
        }
        BARE_TEMPLATE => {
            let mut out = format!("{}.", bp.first.text);
            if let Some(m) = &bp.middle {
                out.push_str(&format!(" {}.", m.text));
            }
            out.push_str(&format!(" {}.", bp.last.text));
            Ok(out)
        }
        other => Err(PromptError::UnknownTemplate(other.to_string())),
    }
}

/// One tokenized text unit and the 1-based frame it came from (0 = bare text).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenUnit {
    pub text: String,
    pub frame: u32,
}

/// Ordered unit sequence produced by [`tokenize`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    units: Vec<TokenUnit>,
}

impl TokenSequence {
    pub fn units(&self) -> &[TokenUnit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.units.iter().map(|u| u.text.as_str())
    }

    /// Normalized (lowercase, ASCII-folded) unit texts for matching.
    pub fn normalized(&self) -> Vec<String> {
        self.units.iter().map(|u| normalize_term(&u.text)).collect()
    }

    /// Joins units back into text with single spaces.
    pub fn detokenize(&self) -> String {
        self.units.iter().map(|u| u.text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

fn is_unit_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

/// Splits text into maximal runs of letters/digits/apostrophes; everything
/// else separates units. Original casing is preserved.
pub fn tokenize(text: &str) -> TokenSequence {
    tokenize_frame(text, 0)
}

/// [`tokenize`] with a source frame index attached to every unit.
pub fn tokenize_frame(text: &str, frame: u32) -> TokenSequence {
    let mut units = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if is_unit_char(c) {
            current.push(c);
        } else if !current.is_empty() {
            units.push(TokenUnit { text: std::mem::take(&mut current), frame });
        }
    }
    if !current.is_empty() {
        units.push(TokenUnit { text: current, frame });
    }
    TokenSequence { units }
}

/// Tokenizes every frame of a prompt, tagging units with their frame index.
pub fn tokenize_prompt(prompt: &TemporalPrompt) -> TokenSequence {
    let mut units = Vec::new();
    for f in prompt.frames() {
        units.extend(tokenize_frame(&f.text, f.index).units);
    }
    TokenSequence { units }
}

/// Matching normalization: lowercase plus a fold of common Latin diacritics
/// to ASCII. Surface text is never altered by this.
pub fn normalize_term(term: &str) -> String {
    let mut out = String::with_capacity(term.len());
    let mut last_space = true;
    for c in term.chars() {
        if c.is_whitespace() {
            if !last_space {
                out.push(' ');
                last_space = true;
            }
            continue;
        }
        last_space = false;
        for lc in c.to_lowercase() {
            out.push(fold_ascii(lc));
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

fn fold_ascii(c: char) -> char {
    match c {
        'à'..='å' | 'ā' | 'ă' | 'ą' => 'a',
        'ç' | 'ć' | 'ĉ' | 'ċ' | 'č' => 'c',
        'è'..='ë' | 'ē' | 'ĕ' | 'ė' | 'ę' | 'ě' => 'e',
        'ì'..='ï' | 'ĩ' | 'ī' | 'ĭ' | 'į' | 'ı' => 'i',
        'ñ' | 'ń' | 'ņ' | 'ň' => 'n',
        'ò'..='ö' | 'ø' | 'ō' | 'ŏ' | 'ő' => 'o',
        'ù'..='ü' | 'ũ' | 'ū' | 'ŭ' | 'ů' | 'ű' | 'ų' => 'u',
        'ý' | 'ÿ' => 'y',
        'ś' | 'ŝ' | 'ş' | 'š' => 's',
        'ź' | 'ż' | 'ž' => 'z',
        other => other,
    }
}
