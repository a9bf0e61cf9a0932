//! Submission targets: the local simulated pipeline and a generic remote
//! adapter speaking a small JSON wire format (used with the mock server in
//! integration tests; real provider bindings are out of scope).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::Transport;
use crate::lexicon::Lexicon;
use crate::sim::{generate, FilterProfile, FilterStage, Generation, ScenarioWorld, SimVideo};

/// Outcome of submitting one prompt to a target.
#[derive(Debug, Clone, PartialEq)]
pub enum SubmitOutcome {
    Blocked(FilterStage),
    Video(SimVideo),
    Failed(String),
}

/// A text-to-video endpoint under test.
pub trait Target: Send + Sync {
    fn name(&self) -> &str;
    fn submit(&self, prompt: &str, seed: u64) -> SubmitOutcome;
}

/// Local simulated pipeline for one filter profile.
pub struct SimTarget {
    pub world: Arc<ScenarioWorld>,
    pub profile: FilterProfile,
    pub lexicon: Arc<Lexicon>,
}

impl Target for SimTarget {
    fn name(&self) -> &str {
        &self.profile.name
    }

    fn submit(&self, prompt: &str, seed: u64) -> SubmitOutcome {
        match generate(prompt, &self.world, &self.profile, &self.lexicon, seed) {
            Ok(Generation::Blocked(stage)) => SubmitOutcome::Blocked(stage),
            Ok(Generation::Video(v)) => SubmitOutcome::Video(v),
            Err(e) => SubmitOutcome::Failed(e.to_string()),
        }
    }
}

/// Wire request of the remote adapter.
#[derive(Debug, Serialize, Deserialize)]
pub struct RemoteSubmission {
    pub prompt: String,
    pub seed: u64,
}

/// Wire reply of the remote adapter.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RemoteReply {
    Blocked { stage: FilterStage },
    Video { video: SimVideo },
}

/// Adapter for a remote endpoint implementing the wire format above.
pub struct RemoteTarget {
    pub name: String,
    pub endpoint: String,
    pub transport: Arc<dyn Transport>,
}

impl Target for RemoteTarget {
    fn name(&self) -> &str {
        &self.name
    }

    fn submit(&self, prompt: &str, seed: u64) -> SubmitOutcome {
        let body = match serde_json::to_value(RemoteSubmission { prompt: prompt.into(), seed }) {
            Ok(b) => b,
            Err(e) => return SubmitOutcome::Failed(e.to_string()),
        };
        let raw = match self.transport.post_json(&self.endpoint, &[], &body) {
            Ok(r) => r,
            Err(e) => return SubmitOutcome::Failed(e.to_string()),
        };
        match serde_json::from_str::<RemoteReply>(&raw) {
            Ok(RemoteReply::Blocked { stage }) => SubmitOutcome::Blocked(stage),
            Ok(RemoteReply::Video { video }) => SubmitOutcome::Video(video),
            Err(e) => SubmitOutcome::Failed(format!("bad remote reply: {e}")),
        }
    }
}
