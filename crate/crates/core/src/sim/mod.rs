//! Fully simulated text-to-video safety pipeline: a risk-monotone pre-filter,
//! a latent Markov-bridge trajectory generator with an unsafe state set,
//! frame emission on a half-second grid, and a profile-driven post-filter.
//!
//! The pipeline is `post(generate(pre(prompt)))`: a prompt blocked at the
//! pre-filter never reaches generation, and the post-filter sees only the
//! finished trajectory. Everything is reproducible from an explicit seed.

pub mod bridge;

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{text_risk, Lexicon};
use crate::num::Real;
use crate::prompt::{normalize_term, parse_temporal, tokenize, BoundaryPrompt};
use crate::Scalar;
use bridge::{
    anchored_unsafe_probability, sample_anchored_trajectory, Anchor, BridgeError, TransitionMatrix,
};

pub use bridge::{bridge_distribution, brute_force_unsafe_probability, BridgeDistribution};

/// Default video duration in seconds; one latent state per second.
pub const DEFAULT_DURATION_SECS: Scalar = 5.0;
/// Emitted frame grid: two frames per latent state.
pub const FRAME_INTERVAL_SECS: Scalar = 0.5;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error("cannot read scenario/profile file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid profile `{name}`: {message}")]
    InvalidProfile { name: String, message: String },
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
}

/// Raw scenario file schema (TOML or JSON).
#[derive(Debug, Deserialize)]
struct ScenarioFile {
    name: String,
    #[serde(default = "default_version")]
    version: String,
    states: Vec<String>,
    transition: Vec<Vec<Scalar>>,
    unsafe_states: Vec<String>,
    neutral_state: String,
    #[serde(default)]
    term_map: BTreeMap<String, String>,
    emissions: BTreeMap<String, String>,
    #[serde(default = "default_duration")]
    duration_secs: Scalar,
}

fn default_version() -> String {
    "0".into()
}

fn default_duration() -> Scalar {
    DEFAULT_DURATION_SECS
}

/// Frame descriptor emitted for one latent state, with its ground-truth
/// unsafe flag (true exactly for states in the unsafe set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub descriptor: String,
    pub unsafe_flag: bool,
}

/// Discrete-state Markov world: transition law, unsafe state set, the
/// term-to-state map grounding frame text, and per-state emissions.
#[derive(Debug, Clone)]
pub struct ScenarioWorld {
    pub name: String,
    pub version: String,
    states: Vec<String>,
    transition: TransitionMatrix<Scalar>,
    unsafe_mask: Vec<bool>,
    neutral_state: usize,
    /// Normalized term units -> state, plus the longest key length.
    term_map: Vec<(Vec<String>, usize)>,
    max_term_units: usize,
    emissions: Vec<Emission>,
    duration_secs: Scalar,
}

impl ScenarioWorld {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let file: ScenarioFile = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| SimError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?
        } else {
            toml::from_str(&text).map_err(|e| SimError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?
        };
        Self::from_file(file)
    }

    fn from_file(file: ScenarioFile) -> Result<Self, SimError> {
        let n = file.states.len();
        if n == 0 {
            return Err(SimError::InvalidScenario("no states".into()));
        }
        let index: BTreeMap<&str, usize> =
            file.states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        if index.len() != n {
            return Err(SimError::InvalidScenario("duplicate state names".into()));
        }
        let lookup = |name: &str| -> Result<usize, SimError> {
            index
                .get(name)
                .copied()
                .ok_or_else(|| SimError::InvalidScenario(format!("unknown state `{name}`")))
        };

        let transition = TransitionMatrix::new(file.transition)
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        if transition.n() != n {
            return Err(SimError::InvalidScenario("transition size != state count".into()));
        }

        let mut unsafe_mask = vec![false; n];
        for s in &file.unsafe_states {
            unsafe_mask[lookup(s)?] = true;
        }
        let neutral_state = lookup(&file.neutral_state)?;

        let mut term_map = Vec::new();
        let mut max_term_units = 0;
        for (term, state) in &file.term_map {
            let units: Vec<String> =
                normalize_term(term).split(' ').map(str::to_string).collect();
            if units.is_empty() || units[0].is_empty() {
                return Err(SimError::InvalidScenario(format!("empty term map key `{term}`")));
            }
            max_term_units = max_term_units.max(units.len());
            term_map.push((units, lookup(state)?));
        }

        let mut emissions = Vec::with_capacity(n);
        for (i, state) in file.states.iter().enumerate() {
            let descriptor = file.emissions.get(state).cloned().ok_or_else(|| {
                SimError::InvalidScenario(format!("missing emission for state `{state}`"))
            })?;
            emissions.push(Emission { descriptor, unsafe_flag: unsafe_mask[i] });
        }

        if file.duration_secs <= 0.0 {
            return Err(SimError::InvalidScenario("duration must be positive".into()));
        }

        Ok(Self {
            name: file.name,
            version: file.version,
            states: file.states,
            transition,
            unsafe_mask,
            neutral_state,
            term_map,
            max_term_units,
            emissions,
            duration_secs: file.duration_secs,
        })
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, idx: usize) -> &str {
        &self.states[idx]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn neutral_state(&self) -> usize {
        self.neutral_state
    }

    pub fn unsafe_mask(&self) -> &[bool] {
        &self.unsafe_mask
    }

    pub fn is_unsafe_state(&self, idx: usize) -> bool {
        self.unsafe_mask[idx]
    }

    pub fn transition(&self) -> &TransitionMatrix<Scalar> {
        &self.transition
    }

    pub fn emission(&self, state: usize) -> &Emission {
        &self.emissions[state]
    }

    pub fn duration_secs(&self) -> Scalar {
        self.duration_secs
    }

    /// Latent trajectory length: one state per second of video.
    pub fn total_steps(&self) -> usize {
        self.duration_secs.round() as usize
    }

    /// Maps text to the state of its best term-map match: longest match
    /// wins, ties go to the leftmost; no match falls back to the neutral
    /// state.
    pub fn state_for_text(&self, text: &str) -> usize {
        let units = tokenize(text).normalized();
        let mut best: Option<(usize, usize, usize)> = None; // (len, start, state)
        for start in 0..units.len() {
            let max_len = self.max_term_units.min(units.len() - start);
            for len in (1..=max_len).rev() {
                for (key, state) in &self.term_map {
                    if key.len() == len && units[start..start + len] == key[..] {
                        let candidate = (len, start, *state);
                        best = Some(match best {
                            None => candidate,
                            Some(b) => {
                                // longer wins; equal length keeps the earlier start
                                if candidate.0 > b.0 || (candidate.0 == b.0 && candidate.1 < b.1) {
                                    candidate
                                } else {
                                    b
                                }
                            }
                        });
                    }
                }
            }
        }
        best.map(|(_, _, s)| s).unwrap_or(self.neutral_state)
    }

    /// Probability that the bridge pinned at (start, end) visits the unsafe
    /// set at any step (endpoints included).
    pub fn unsafe_probability(
        &self,
        start: usize,
        end: usize,
        total_steps: usize,
    ) -> Result<Scalar, SimError> {
        Ok(bridge::unsafe_probability(&self.transition, &self.unsafe_mask, start, end, total_steps)?)
    }

    /// Exhaustive-enumeration oracle for [`Self::unsafe_probability`].
    pub fn brute_force_unsafe_probability(
        &self,
        start: usize,
        end: usize,
        total_steps: usize,
    ) -> Result<Scalar, SimError> {
        Ok(brute_force_unsafe_probability(
            &self.transition,
            &self.unsafe_mask,
            start,
            end,
            total_steps,
        )?)
    }

    /// Endpoint-conditioned bridge law for this world's chain.
    pub fn bridge(
        &self,
        start: usize,
        end: usize,
        total_steps: usize,
    ) -> Result<BridgeDistribution<Scalar>, SimError> {
        Ok(bridge_distribution(&self.transition, start, end, total_steps)?)
    }
}

/// Maps the first/last frame texts of a boundary prompt to latent states.
pub fn map_boundary_to_states(bp: &BoundaryPrompt, world: &ScenarioWorld) -> (usize, usize) {
    (world.state_for_text(&bp.first.text), world.state_for_text(&bp.last.text))
}

/// Pre-filter decision function shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PreFilterKind {
    /// Deterministic: block iff risk > tau.
    Threshold { tau: Scalar },
    /// Stochastic: block with probability 1/(1 + exp(-k (risk - tau))).
    Logistic { k: Scalar, tau: Scalar },
}

impl Default for PreFilterKind {
    fn default() -> Self {
        PreFilterKind::Threshold { tau: 0.0 }
    }
}

/// Per-target filter configuration: which filters exist and how they act.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterProfile {
    pub name: String,
    pub pre_enabled: bool,
    pub post_enabled: bool,
    #[serde(default)]
    pub pre_kind: PreFilterKind,
    /// Per-video detection probability of the post-filter.
    #[serde(default)]
    pub post_detect: Scalar,
}

impl FilterProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |message: &str| {
            Err(SimError::InvalidProfile { name: self.name.clone(), message: message.into() })
        };
        if !(0.0..=1.0).contains(&self.post_detect) {
            return fail("post_detect outside [0, 1]");
        }
        match self.pre_kind {
            PreFilterKind::Threshold { tau } if tau < 0.0 => fail("tau must be >= 0"),
            PreFilterKind::Logistic { k, tau } if k <= 0.0 || tau < 0.0 => {
                fail("logistic needs k > 0 and tau >= 0")
            }
            _ => Ok(()),
        }
    }

    /// Unfiltered profile, useful in tests.
    pub fn open(name: &str) -> Self {
        Self {
            name: name.into(),
            pre_enabled: false,
            post_enabled: false,
            pre_kind: PreFilterKind::default(),
            post_detect: 0.0,
        }
    }
}

/// Profile file: `[[profiles]]` entries in TOML (or a JSON array field).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSet {
    pub profiles: Vec<FilterProfile>,
}

impl ProfileSet {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let set: ProfileSet = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| SimError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?
        } else {
            toml::from_str(&text).map_err(|e| SimError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?
        };
        for p in &set.profiles {
            p.validate()?;
        }
        Ok(set)
    }

    pub fn get(&self, name: &str) -> Result<&FilterProfile, SimError> {
        self.profiles
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| SimError::UnknownProfile(name.to_string()))
    }
}

/// Closed-form block probability of a pre-filter kind at a given risk.
/// Threshold filters give {0, 1}; logistic filters a smooth sigmoid.
pub fn pre_block_probability<R: Real>(kind: &PreFilterKind, risk: R) -> R {
    match *kind {
        PreFilterKind::Threshold { tau } => {
            if risk > R::from_f64(tau).unwrap() {
                R::one()
            } else {
                R::zero()
            }
        }
        PreFilterKind::Logistic { k, tau } => {
            let k = R::from_f64(k).unwrap();
            let tau = R::from_f64(tau).unwrap();
            R::one() / (R::one() + (-(k * (risk - tau))).exp())
        }
    }
}

/// Outcome of one filter decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterDecision {
    Pass,
    Block,
}

/// Input-side moderation: risk-monotone decision on the prompt text.
pub fn pre_filter<G: Rng + ?Sized>(
    text: &str,
    profile: &FilterProfile,
    lexicon: &Lexicon,
    rng: &mut G,
) -> FilterDecision {
    if !profile.pre_enabled {
        return FilterDecision::Pass;
    }
    let risk = text_risk(text, lexicon);
    let block_p: Scalar = pre_block_probability(&profile.pre_kind, risk);
    let blocked = match profile.pre_kind {
        PreFilterKind::Threshold { .. } => block_p >= 1.0,
        PreFilterKind::Logistic { .. } => rng.gen::<Scalar>() < block_p,
    };
    if blocked {
        FilterDecision::Block
    } else {
        FilterDecision::Pass
    }
}

/// Where a submission was blocked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStage {
    Pre,
    Post,
}

/// One emitted video frame on the half-second grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFrame {
    pub timestamp: Scalar,
    pub descriptor: String,
    pub unsafe_flag: bool,
}

/// A simulated video: two frames per latent state, strictly increasing
/// timestamps, flags consistent with the sampled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimVideo {
    pub frames: Vec<SimFrame>,
    pub duration: Scalar,
    pub trajectory: Vec<usize>,
}

/// Result of one simulated submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Generation {
    Blocked(FilterStage),
    Video(SimVideo),
}

/// Derives trajectory anchors from submitted text.
///
/// Frame-marker prompts anchor every frame (positions scaled when the
/// prompt frame count differs from the trajectory length); boundary-template
/// text anchors the endpoints plus an optional middle at ⌈T/2⌉; anything
/// else grounds the whole text to one state pinned at both ends.
pub fn parse_anchors(text: &str, world: &ScenarioWorld, total_steps: usize) -> Vec<Anchor> {
    if let Ok(p) = parse_temporal(text, "anchors", "fixture") {
        if p.total_frames() >= 2 {
            let tp = p.total_frames() as usize;
            let mut anchors: Vec<Anchor> = Vec::new();
            for f in p.frames() {
                let pos = if tp == total_steps {
                    f.index as usize
                } else {
                    let scaled = (f.index as usize - 1) as Scalar * (total_steps - 1) as Scalar
                        / (tp - 1) as Scalar;
                    1 + scaled.round() as usize
                };
                let state = world.state_for_text(&f.text);
                if anchors.last().map(|&(p, _)| p) != Some(pos) {
                    anchors.push((pos, state));
                }
            }
            return anchors;
        }
    }
    if let Some((first, middle, last)) = parse_boundary_clauses(text) {
        let mut anchors = vec![(1, world.state_for_text(&first))];
        if let Some(mid) = middle {
            let pos = total_steps.div_ceil(2);
            if pos > 1 && pos < total_steps {
                anchors.push((pos, world.state_for_text(&mid)));
            }
        }
        anchors.push((total_steps, world.state_for_text(&last)));
        return anchors;
    }
    let s = world.state_for_text(text);
    vec![(1, s), (total_steps, s)]
}

fn clean_clause(s: &str) -> String {
    let s = s.trim();
    let s = s.strip_suffix('.').unwrap_or(s);
    s.trim().to_string()
}

fn parse_boundary_clauses(text: &str) -> Option<(String, Option<String>, String)> {
    const FIRST: &str = "First frame:";
    const MIDDLE: &str = "Middle frame:";
    const LAST: &str = "Last frame:";
    let first_idx = text.find(FIRST)?;
    let last_idx = text.find(LAST)?;
    if last_idx <= first_idx {
        return None;
    }
    let middle_idx = text.find(MIDDLE).filter(|&m| m > first_idx && m < last_idx);
    let first_end = middle_idx.unwrap_or(last_idx);
    let first = clean_clause(&text[first_idx + FIRST.len()..first_end]);
    let middle = middle_idx.map(|m| clean_clause(&text[m + MIDDLE.len()..last_idx]));
    let last = clean_clause(&text[last_idx + LAST.len()..]);
    Some((first, middle, last))
}

/// Runs the full simulated pipeline on submitted text: pre-filter, bridge
/// trajectory sampling, frame emission, post-filter. Reproducible from the
/// seed; a blocked prompt performs no generation work.
pub fn generate(
    text: &str,
    world: &ScenarioWorld,
    profile: &FilterProfile,
    lexicon: &Lexicon,
    seed: u64,
) -> Result<Generation, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if pre_filter(text, profile, lexicon, &mut rng) == FilterDecision::Block {
        return Ok(Generation::Blocked(FilterStage::Pre));
    }

    let total_steps = world.total_steps();
    let anchors = parse_anchors(text, world, total_steps);
    let trajectory = sample_anchored_trajectory(world.transition(), &anchors, total_steps, &mut rng)?;

    let hit_unsafe = trajectory.iter().any(|&z| world.unsafe_mask[z]);
    if profile.post_enabled && hit_unsafe && rng.gen::<Scalar>() < profile.post_detect {
        return Ok(Generation::Blocked(FilterStage::Post));
    }

    let mut frames = Vec::with_capacity(trajectory.len() * 2);
    for (step, &state) in trajectory.iter().enumerate() {
        let emission = world.emission(state);
        let base = step as Scalar;
        for half in [FRAME_INTERVAL_SECS, 2.0 * FRAME_INTERVAL_SECS] {
            frames.push(SimFrame {
                timestamp: base + half,
                descriptor: emission.descriptor.clone(),
                unsafe_flag: emission.unsafe_flag,
            });
        }
    }
    Ok(Generation::Video(SimVideo {
        frames,
        duration: world.duration_secs(),
        trajectory,
    }))
}

/// Closed-form expected attack success rate under a perfect judge:
/// `(1 - pre block) * P(trajectory hits the unsafe set) * (1 - d [post])`.
pub fn analytic_asr(
    risk: Scalar,
    anchors: &[Anchor],
    world: &ScenarioWorld,
    profile: &FilterProfile,
    total_steps: usize,
) -> Result<Scalar, SimError> {
    let pre_pass = if profile.pre_enabled {
        1.0 - pre_block_probability(&profile.pre_kind, risk)
    } else {
        1.0
    };
    let p_unsafe =
        anchored_unsafe_probability(world.transition(), &world.unsafe_mask, anchors, total_steps)?;
    let post_pass = if profile.post_enabled { 1.0 - profile.post_detect } else { 1.0 };
    Ok(pre_pass * p_unsafe * post_pass)
}

/// [`analytic_asr`] for a rendered prompt text: risk and anchors are derived
/// the same way the simulated target derives them.
pub fn analytic_asr_for_text(
    text: &str,
    world: &ScenarioWorld,
    profile: &FilterProfile,
    lexicon: &Lexicon,
) -> Result<Scalar, SimError> {
    let total_steps = world.total_steps();
    let risk = text_risk(text, lexicon);
    let anchors = parse_anchors(text, world, total_steps);
    analytic_asr(risk, &anchors, world, profile, total_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::LexiconEntry;
    use crate::prompt::FrameSpec;

    pub(crate) fn test_world() -> ScenarioWorld {
        let toml_text = r#"
            name = "test-world"
            version = "1"
            states = ["calm", "rising", "overload", "settled"]
            neutral_state = "calm"
            unsafe_states = ["overload"]
            transition = [
                [0.55, 0.35, 0.05, 0.05],
                [0.10, 0.40, 0.40, 0.10],
                [0.00, 0.10, 0.55, 0.35],
                [0.05, 0.10, 0.05, 0.80],
            ]
            [term_map]
            workshop = "calm"
            bench = "calm"
            tremor = "rising"
            overload = "overload"
            aftermath = "settled"
            [emissions]
            calm = "the widget rests on the workshop bench"
            rising = "the widget trembles as a low tremor builds"
            overload = "the widget bursts into sparks"
            settled = "scattered parts lie in the quiet aftermath"
        "#;
        let file: ScenarioFile = toml::from_str(toml_text).unwrap();
        ScenarioWorld::from_file(file).unwrap()
    }

    fn test_lexicon() -> Lexicon {
        Lexicon::new(
            "t",
            "0",
            [
                ("detonate".to_string(), LexiconEntry { score: 0.9, candidates: vec![] }),
                ("smoke".to_string(), LexiconEntry { score: 0.3, candidates: vec![] }),
            ],
        )
        .unwrap()
    }

    #[test]
    fn scenario_validation_catches_mistakes() {
        let bad = r#"
            name = "bad"
            states = ["a", "b"]
            neutral_state = "a"
            unsafe_states = ["zzz"]
            transition = [[0.5, 0.5], [0.5, 0.5]]
            [emissions]
            a = "x"
            b = "y"
        "#;
        let file: ScenarioFile = toml::from_str(bad).unwrap();
        assert!(matches!(ScenarioWorld::from_file(file), Err(SimError::InvalidScenario(_))));
    }

    #[test]
    fn state_mapping_longest_then_leftmost() {
        let world = test_world();
        assert_eq!(world.state_for_text("near the workshop door"), 0);
        assert_eq!(world.state_for_text("nothing mapped here"), world.neutral_state());
        // two single-unit matches: leftmost wins
        assert_eq!(world.state_for_text("the tremor reaches the workshop"), 1);
        assert_eq!(world.state_for_text("the workshop feels a tremor"), 0);
    }

    #[test]
    fn boundary_mapping_uses_frame_texts() {
        let world = test_world();
        let bp = BoundaryPrompt::new(
            FrameSpec::new(1, "the workshop stands quiet").unwrap(),
            FrameSpec::new(5, "the aftermath remains").unwrap(),
            5,
        );
        assert_eq!(map_boundary_to_states(&bp, &world), (0, 3));
    }

    #[test]
    fn pre_filter_threshold_and_disabled() {
        let lexicon = test_lexicon();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut profile = FilterProfile {
            name: "t".into(),
            pre_enabled: true,
            post_enabled: false,
            pre_kind: PreFilterKind::Threshold { tau: 0.5 },
            post_detect: 0.0,
        };
        // R = 1.2 > 0.5 -> block
        assert_eq!(
            pre_filter("detonate near smoke", &profile, &lexicon, &mut rng),
            FilterDecision::Block
        );
        // R = 0 -> pass
        assert_eq!(pre_filter("calm street", &profile, &lexicon, &mut rng), FilterDecision::Pass);
        // disabled pre passes anything
        profile.pre_enabled = false;
        assert_eq!(
            pre_filter("detonate near smoke", &profile, &lexicon, &mut rng),
            FilterDecision::Pass
        );
    }

    #[test]
    fn logistic_block_probability_is_monotone() {
        let kind = PreFilterKind::Logistic { k: 8.0, tau: 0.5 };
        let mut prev = -1.0;
        for i in 0..50 {
            let r = i as Scalar * 0.05;
            let p: Scalar = pre_block_probability(&kind, r);
            assert!(p >= prev);
            assert!((0.0..=1.0).contains(&p));
            prev = p;
        }
        // generic instantiation at f32
        let p32: f32 = pre_block_probability(&kind, 0.5f32);
        assert!((p32 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn anchors_from_boundary_template() {
        let world = test_world();
        let text = "First frame: the workshop stands quiet. Last frame: parts in the aftermath.";
        assert_eq!(parse_anchors(text, &world, 5), vec![(1, 0), (5, 3)]);
        let with_mid = "First frame: the workshop. Middle frame: a tremor builds. Last frame: the aftermath.";
        assert_eq!(parse_anchors(with_mid, &world, 5), vec![(1, 0), (3, 1), (5, 3)]);
    }

    #[test]
    fn anchors_from_frame_markers() {
        let world = test_world();
        let text = "Frame 1: the workshop\nFrame 2: a tremor\nFrame 3: the overload\nFrame 4: the bench\nFrame 5: the aftermath";
        assert_eq!(
            parse_anchors(text, &world, 5),
            vec![(1, 0), (2, 1), (3, 2), (4, 0), (5, 3)]
        );
        // 3 frames scaled onto 5 steps
        let text = "Frame 1: the workshop\nFrame 2: the overload\nFrame 3: the aftermath";
        assert_eq!(parse_anchors(text, &world, 5), vec![(1, 0), (3, 2), (5, 3)]);
    }

    #[test]
    fn anchors_from_plain_text_pin_both_ends() {
        let world = test_world();
        assert_eq!(parse_anchors("an overload in the workshop", &world, 5), vec![(1, 2), (5, 2)]);
        assert_eq!(parse_anchors("nothing mapped", &world, 5), vec![(1, 0), (5, 0)]);
    }

    #[test]
    fn generate_is_seed_deterministic() {
        let world = test_world();
        let lexicon = test_lexicon();
        let profile = FilterProfile::open("open");
        let text = "First frame: the workshop. Last frame: the aftermath.";
        let a = generate(text, &world, &profile, &lexicon, 1234).unwrap();
        let b = generate(text, &world, &profile, &lexicon, 1234).unwrap();
        assert_eq!(a, b);
        let c = generate(text, &world, &profile, &lexicon, 1235).unwrap();
        // different seed may change the trajectory but stays valid
        match (a, c) {
            (Generation::Video(va), Generation::Video(vc)) => {
                assert_eq!(va.trajectory[0], 0);
                assert_eq!(va.trajectory[4], 3);
                assert_eq!(vc.trajectory[0], 0);
                assert_eq!(vc.frames.len(), 10);
                let mut prev = 0.0;
                for f in &va.frames {
                    assert!(f.timestamp > prev);
                    prev = f.timestamp;
                }
            }
            other => panic!("expected videos, got {other:?}"),
        }
    }

    #[test]
    fn frame_flags_match_trajectory() {
        let world = test_world();
        let lexicon = test_lexicon();
        let profile = FilterProfile::open("open");
        let text = "First frame: the overload. Last frame: the overload.";
        match generate(text, &world, &profile, &lexicon, 7).unwrap() {
            Generation::Video(v) => {
                for (i, f) in v.frames.iter().enumerate() {
                    let state = v.trajectory[i / 2];
                    assert_eq!(f.unsafe_flag, world.is_unsafe_state(state));
                    assert_eq!(f.descriptor, world.emission(state).descriptor);
                }
            }
            other => panic!("expected video, got {other:?}"),
        }
    }

    #[test]
    fn post_filter_with_full_detection_always_blocks_unsafe() {
        let world = test_world();
        let lexicon = test_lexicon();
        let profile = FilterProfile {
            name: "strict-post".into(),
            pre_enabled: false,
            post_enabled: true,
            pre_kind: PreFilterKind::default(),
            post_detect: 1.0,
        };
        // both anchors in the unsafe state: every trajectory hits it
        let text = "First frame: the overload. Last frame: the overload.";
        for seed in 0..20 {
            assert_eq!(
                generate(text, &world, &profile, &lexicon, seed).unwrap(),
                Generation::Blocked(FilterStage::Post)
            );
        }
    }

    #[test]
    fn benign_bridge_yields_all_safe_frames() {
        let world = test_world();
        let lexicon = test_lexicon();
        let profile = FilterProfile {
            name: "strict".into(),
            pre_enabled: true,
            post_enabled: true,
            pre_kind: PreFilterKind::Threshold { tau: 0.5 },
            post_detect: 1.0,
        };
        // settled -> settled cannot reach overload back (row forbids it) only
        // via rising/calm; not guaranteed safe. Use a fully pinned safe path.
        let text = "Frame 1: the workshop\nFrame 2: the bench\nFrame 3: the workshop\nFrame 4: the bench\nFrame 5: the workshop";
        match generate(text, &world, &profile, &lexicon, 3).unwrap() {
            Generation::Video(v) => assert!(v.frames.iter().all(|f| !f.unsafe_flag)),
            other => panic!("expected video, got {other:?}"),
        }
    }

    #[test]
    fn pre_block_prevents_generation_work() {
        let world = test_world();
        let lexicon = test_lexicon();
        let profile = FilterProfile {
            name: "pre-only".into(),
            pre_enabled: true,
            post_enabled: false,
            pre_kind: PreFilterKind::Threshold { tau: 0.1 },
            post_detect: 0.0,
        };
        // Anchor pair (settled -> calm in 4 steps) is reachable, but make the
        // prompt unreachable instead: overload -> calm has no 1-step path in a
        // 2-step world. Simpler: a high-risk prompt whose anchors would error.
        let two_step = {
            let mut file: ScenarioFile = toml::from_str(
                r#"
                name = "tiny"
                states = ["a", "b"]
                neutral_state = "a"
                unsafe_states = []
                transition = [[1.0, 0.0], [0.0, 1.0]]
                duration_secs = 2.0
                [term_map]
                alpha = "a"
                beta = "b"
                [emissions]
                a = "a"
                b = "b"
            "#,
            )
            .unwrap();
            file.duration_secs = 2.0;
            ScenarioWorld::from_file(file).unwrap()
        };
        let lexicon2 = Lexicon::new(
            "l",
            "0",
            [("alpha".to_string(), LexiconEntry { score: 0.9, candidates: vec![] })],
        )
        .unwrap();
        // anchors alpha -> beta are unreachable; a pre-block must hide that
        let text = "First frame: alpha. Last frame: beta.";
        assert_eq!(
            generate(text, &two_step, &profile, &lexicon2, 0).unwrap(),
            Generation::Blocked(FilterStage::Pre)
        );
        // with the pre-filter off the unreachable endpoint surfaces
        let open = FilterProfile::open("open");
        assert!(matches!(
            generate(text, &two_step, &open, &lexicon2, 0),
            Err(SimError::Bridge(BridgeError::UnreachableEndpoint { .. }))
        ));
        let _ = (world, lexicon, profile);
    }

    #[test]
    fn analytic_asr_factors() {
        let world = test_world();
        // pre blocks deterministically -> 0
        let strict = FilterProfile {
            name: "s".into(),
            pre_enabled: true,
            post_enabled: false,
            pre_kind: PreFilterKind::Threshold { tau: 0.5 },
            post_detect: 0.0,
        };
        let anchors = vec![(1, 0), (5, 3)];
        assert_eq!(analytic_asr(1.2, &anchors, &world, &strict, 5).unwrap(), 0.0);

        // no filters: ASR equals the unsafe probability
        let open = FilterProfile::open("o");
        let p = world.unsafe_probability(0, 3, 5).unwrap();
        let asr = analytic_asr(1.2, &anchors, &world, &open, 5).unwrap();
        assert!((asr - p).abs() < 1e-12);

        // post detection scales it down
        let post = FilterProfile {
            name: "p".into(),
            pre_enabled: false,
            post_enabled: true,
            pre_kind: PreFilterKind::default(),
            post_detect: 0.4,
        };
        let asr = analytic_asr(0.0, &anchors, &world, &post, 5).unwrap();
        assert!((asr - p * 0.6).abs() < 1e-12);
    }
}
