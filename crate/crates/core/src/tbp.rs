//! Temporal boundary prompting: structure a raw prompt into frames via a
//! rewriter backend, then keep only the boundary specifications.

use thiserror::Error;

use crate::backend::{BackendError, RewriteBackend};
use crate::prompt::{parse_temporal, BoundaryPrompt, PromptError, TemporalPrompt};

/// Default frame count: one frame per second of a five-second video.
pub const DEFAULT_FRAMES: u32 = 5;

#[derive(Debug, Error)]
pub enum TbpError {
    #[error("need at least {need} frames, got {found}")]
    TooFewFrames { need: u32, found: u32 },
    #[error("backend reply lacks {expected} frame markers (parsed {found})")]
    StructureParseFailure { expected: u32, found: u32 },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Structures a raw prompt into exactly `frames` frame descriptions.
///
/// A malformed backend reply is retried once with an amended instruction
/// before the failure is surfaced.
pub fn structure_prompt(
    raw: &str,
    backend: &dyn RewriteBackend,
    frames: u32,
    scene_id: &str,
    category: &str,
) -> Result<TemporalPrompt, TbpError> {
    if frames < 2 {
        return Err(TbpError::TooFewFrames { need: 2, found: frames });
    }
    let mut failure = TbpError::StructureParseFailure { expected: frames, found: 0 };
    for amended in [false, true] {
        let reply = backend.structure(raw, frames, amended)?;
        match parse_temporal(&reply, scene_id, category) {
            Ok(prompt) if prompt.total_frames() == frames => return Ok(prompt),
            Ok(prompt) => {
                failure = TbpError::StructureParseFailure {
                    expected: frames,
                    found: prompt.total_frames(),
                };
            }
            Err(PromptError::EmptyPrompt | PromptError::MalformedFrameMarker { .. }) => {
                failure = TbpError::StructureParseFailure { expected: frames, found: 0 };
            }
            Err(e) => return Err(e.into()),
        }
    }
    Err(failure)
}

/// Keeps only the first and last frame; intermediate frames are dropped.
/// The input is never modified and no backend or lexicon is consulted.
pub fn boundary_extract(prompt: &TemporalPrompt) -> Result<BoundaryPrompt, TbpError> {
    let total = prompt.total_frames();
    if total < 2 {
        return Err(TbpError::TooFewFrames { need: 2, found: total });
    }
    Ok(BoundaryPrompt::new(
        prompt.frame(1).clone(),
        prompt.frame(total).clone(),
        total,
    ))
}

/// Boundary extraction that also keeps an explicit middle frame at ⌈T/2⌉.
pub fn insert_middle(prompt: &TemporalPrompt) -> Result<BoundaryPrompt, TbpError> {
    let total = prompt.total_frames();
    if total < 3 {
        return Err(TbpError::TooFewFrames { need: 3, found: total });
    }
    let mid = total.div_ceil(2);
    Ok(boundary_extract(prompt)?.with_middle(prompt.frame(mid).clone()))
}
