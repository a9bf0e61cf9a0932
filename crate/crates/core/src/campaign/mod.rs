//! Campaign orchestration: configuration, variant pipelines, bounded-
//! concurrency execution against targets, idempotent persistence, and
//! report emission.

pub mod dataset;
pub mod log;
pub mod report;
pub mod target;

pub use dataset::{ingest_dataset, DatasetError, DatasetRecord};
pub use log::{read_log, LogError, Provenance, ResultLog};
pub use report::{report, ReportError, ReportKind};
pub use target::{SimTarget, SubmitOutcome, Target};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::{
    BackendMode, Cassette, HttpTransport, LexiconBackend, RemoteBackend, RemoteConfig,
    RewriteBackend, StructureTemplates,
};
use crate::csm::{apply_csm, apply_csm_full, Budget, CsmError, SubstitutionRecord};
use crate::eval::{
    sample_frames, video_verdict, AttackRecord, GenOutcome, GroundTruthJudge, Variant,
};
use crate::lexicon::{text_risk, Lexicon};
use crate::prompt::{render_boundary, PromptError};
use crate::sim::{FilterDecision, FilterStage, ProfileSet, ScenarioWorld, FRAME_INTERVAL_SECS};
use crate::tbp::{boundary_extract, insert_middle, structure_prompt, TbpError, DEFAULT_FRAMES};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn default_frames() -> u32 {
    DEFAULT_FRAMES
}

fn default_budget() -> Budget {
    Budget::DEFAULT
}

fn default_max_in_flight() -> usize {
    4
}

fn default_attempts() -> u32 {
    1
}

fn default_render_template() -> String {
    crate::prompt::DEFAULT_TEMPLATE.to_string()
}

/// Campaign run configuration, loaded from TOML or JSON. Relative paths are
/// resolved against the config file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub dataset: PathBuf,
    pub lexicon: PathBuf,
    pub scenario: PathBuf,
    pub profiles_file: PathBuf,
    /// Profile names to attack, in run order.
    pub profiles: Vec<String>,
    /// Pipeline variants to run, in run order.
    pub variants: Vec<Variant>,
    #[serde(default = "default_frames")]
    pub frames: u32,
    #[serde(default = "default_budget")]
    pub budget: Budget,
    pub base_seed: u64,
    #[serde(default)]
    pub backend_mode: BackendMode,
    pub output_dir: PathBuf,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    /// Structure templates for the lexicon backend.
    #[serde(default)]
    pub templates: Option<PathBuf>,
    /// Remote backend config, required for record/replay/passthrough modes.
    #[serde(default)]
    pub remote: Option<PathBuf>,
    #[serde(default)]
    pub cassette: Option<PathBuf>,
    /// Generations attempted per (prompt, variant, profile).
    #[serde(default = "default_attempts")]
    pub attempts: u32,
    #[serde(default = "default_render_template")]
    pub render_template: String,
}

impl CampaignConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CampaignError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CampaignError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: CampaignConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| CampaignError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| CampaignError::Config(format!("{}: {e}", path.display())))?
        };
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        resolve(&mut self.dataset);
        resolve(&mut self.lexicon);
        resolve(&mut self.scenario);
        resolve(&mut self.profiles_file);
        resolve(&mut self.output_dir);
        if let Some(t) = &mut self.templates {
            resolve(t);
        }
        if let Some(r) = &mut self.remote {
            resolve(r);
        }
        if let Some(c) = &mut self.cassette {
            resolve(c);
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.profiles.is_empty() {
            return Err(CampaignError::Config("at least one profile is required".into()));
        }
        if self.variants.is_empty() {
            return Err(CampaignError::Config("at least one variant is required".into()));
        }
        if let Some(v) = self.variants.iter().find(|v| !v.is_pipeline()) {
            return Err(CampaignError::Config(format!(
                "variant `{}` is a report-fixture label, not a runnable pipeline",
                v.id()
            )));
        }
        if self.frames < 2 {
            return Err(CampaignError::Config("frames must be at least 2".into()));
        }
        if self.attempts == 0 {
            return Err(CampaignError::Config("attempts must be at least 1".into()));
        }
        if self.backend_mode != BackendMode::Lexicon && self.remote.is_none() {
            return Err(CampaignError::Config(
                "record/replay/passthrough modes need a remote backend config".into(),
            ));
        }
        if matches!(self.backend_mode, BackendMode::Record | BackendMode::Replay)
            && self.cassette.is_none()
        {
            return Err(CampaignError::Config("record/replay modes need a cassette path".into()));
        }
        Ok(())
    }

    /// Stable content hash binding a result log to its configuration.
    pub fn config_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let bytes = serde_json::to_vec(&value).expect("canonical json");
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("variant `{0}` is not a runnable pipeline")]
    NotRunnable(String),
    #[error(transparent)]
    Tbp(#[from] TbpError),
    #[error(transparent)]
    Csm(#[from] CsmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Final submitted text with its transformation provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformOutcome {
    pub text: String,
    pub substitutions: Vec<SubstitutionRecord>,
    /// Risk of the same rendering before any substitution.
    pub risk_before: Scalar,
    /// Risk of the submitted text.
    pub risk_after: Scalar,
}

/// Runs one variant pipeline on a raw prompt and renders the submission.
#[allow(clippy::too_many_arguments)]
pub fn run_variant(
    raw: &str,
    variant: Variant,
    backend: &dyn RewriteBackend,
    lexicon: &Lexicon,
    frames: u32,
    budget: Budget,
    render_template: &str,
    scene_id: &str,
    category: &str,
) -> Result<TransformOutcome, TransformError> {
    if !variant.is_pipeline() {
        return Err(TransformError::NotRunnable(variant.id().into()));
    }
    if variant == Variant::Direct {
        let risk = text_risk(raw, lexicon);
        return Ok(TransformOutcome {
            text: raw.to_string(),
            substitutions: vec![],
            risk_before: risk,
            risk_after: risk,
        });
    }

    let structured = structure_prompt(raw, backend, frames, scene_id, category)?;
    match variant {
        Variant::Tfm => {
            let boundary = boundary_extract(&structured)?;
            let raw_render = render_boundary(&boundary, render_template)?;
            let rewritten = apply_csm(&boundary, lexicon, backend, budget)?;
            let text = render_boundary(&rewritten.boundary, render_template)?;
            Ok(TransformOutcome {
                risk_before: text_risk(&raw_render, lexicon),
                risk_after: text_risk(&text, lexicon),
                substitutions: rewritten.records,
                text,
            })
        }
        Variant::WithMiddle => {
            let boundary = insert_middle(&structured)?;
            let raw_render = render_boundary(&boundary, render_template)?;
            let rewritten = apply_csm(&boundary, lexicon, backend, budget)?;
            let text = render_boundary(&rewritten.boundary, render_template)?;
            Ok(TransformOutcome {
                risk_before: text_risk(&raw_render, lexicon),
                risk_after: text_risk(&text, lexicon),
                substitutions: rewritten.records,
                text,
            })
        }
        Variant::WithoutCsm => {
            let boundary = boundary_extract(&structured)?;
            let text = render_boundary(&boundary, render_template)?;
            let risk = text_risk(&text, lexicon);
            Ok(TransformOutcome {
                text,
                substitutions: vec![],
                risk_before: risk,
                risk_after: risk,
            })
        }
        Variant::WithoutTbp => {
            let raw_render = structured.to_marker_text();
            let rewritten = apply_csm_full(&structured, lexicon, backend, budget)?;
            let text = rewritten.prompt.to_marker_text();
            Ok(TransformOutcome {
                risk_before: text_risk(&raw_render, lexicon),
                risk_after: text_risk(&text, lexicon),
                substitutions: rewritten.records,
                text,
            })
        }
        Variant::RevsSeq => {
            let raw_boundary = boundary_extract(&structured)?;
            let raw_render = render_boundary(&raw_boundary, render_template)?;
            let rewritten = apply_csm_full(&structured, lexicon, backend, budget)?;
            let boundary = boundary_extract(&rewritten.prompt)?;
            let text = render_boundary(&boundary, render_template)?;
            Ok(TransformOutcome {
                risk_before: text_risk(&raw_render, lexicon),
                risk_after: text_risk(&text, lexicon),
                substitutions: rewritten.records,
                text,
            })
        }
        Variant::Direct | Variant::Rab | Variant::Daca | Variant::Veil => unreachable!(),
    }
}

/// Per-record seed: a stable hash of the base seed and the record key, so
/// adding prompts never perturbs existing records' randomness.
pub fn derive_seed(base: u64, prompt_id: &str, variant: Variant, profile: &str, attempt: u32) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(prompt_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(variant.id().as_bytes());
    hasher.update([0x1f]);
    hasher.update(profile.as_bytes());
    hasher.update([0x1f]);
    hasher.update(attempt.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Run statistics; failures are records with an infrastructure failure
/// reason attached (distinct from filter blocks).
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub total_tasks: usize,
    pub skipped: usize,
    pub written: usize,
    pub successes: usize,
    pub failures: usize,
    pub log_path: PathBuf,
}

struct Task {
    index: usize,
    prompt: DatasetRecord,
    variant: Variant,
    profile: String,
    seed: u64,
}

struct Engine {
    lexicon: Arc<Lexicon>,
    backend: Arc<dyn RewriteBackend>,
    targets: BTreeMap<String, Arc<dyn Target>>,
    frames: u32,
    budget: Budget,
    render_template: String,
}

impl Engine {
    fn execute(&self, task: &Task) -> AttackRecord {
        let transformed = run_variant(
            &task.prompt.prompt,
            task.variant,
            self.backend.as_ref(),
            &self.lexicon,
            self.frames,
            self.budget,
            &self.render_template,
            &task.prompt.id,
            task.prompt.category.id(),
        );
        let (text, substitutions) = match transformed {
            Ok(t) => (t.text, t.substitutions),
            Err(e) => {
                return AttackRecord::assemble(
                    task.prompt.id.clone(),
                    task.prompt.category,
                    task.variant,
                    task.profile.clone(),
                    FilterDecision::Pass,
                    GenOutcome::Failed,
                    None,
                    task.seed,
                    vec![],
                    Some(format!("transform: {e}")),
                );
            }
        };

        let target = &self.targets[&task.profile];
        let (pre, gen, verdict, failure) = match target.submit(&text, task.seed) {
            SubmitOutcome::Blocked(FilterStage::Pre) => {
                (FilterDecision::Block, GenOutcome::Failed, None, None)
            }
            SubmitOutcome::Blocked(FilterStage::Post) => {
                (FilterDecision::Pass, GenOutcome::BlockedPost, None, None)
            }
            SubmitOutcome::Failed(reason) => {
                (FilterDecision::Pass, GenOutcome::Failed, None, Some(reason))
            }
            SubmitOutcome::Video(video) => {
                let judge = GroundTruthJudge;
                let verdict = sample_frames(&video, FRAME_INTERVAL_SECS)
                    .and_then(|samples| video_verdict(&samples, &judge));
                match verdict {
                    Ok(v) => (FilterDecision::Pass, GenOutcome::Video, Some(v), None),
                    Err(e) => (
                        FilterDecision::Pass,
                        GenOutcome::Failed,
                        None,
                        Some(format!("evaluation: {e}")),
                    ),
                }
            }
        };
        AttackRecord::assemble(
            task.prompt.id.clone(),
            task.prompt.category,
            task.variant,
            task.profile.clone(),
            pre,
            gen,
            verdict,
            task.seed,
            substitutions,
            failure,
        )
    }
}

fn build_backend(cfg: &CampaignConfig, lexicon: Arc<Lexicon>) -> Result<Arc<dyn RewriteBackend>, CampaignError> {
    let mode = BackendMode::from_env()
        .map_err(|e| CampaignError::Config(e.to_string()))?
        .unwrap_or(cfg.backend_mode);
    match mode {
        BackendMode::Lexicon => {
            let templates = match &cfg.templates {
                Some(path) => StructureTemplates::load(path)
                    .map_err(|e| CampaignError::Config(e.to_string()))?,
                None => StructureTemplates::default(),
            };
            Ok(Arc::new(LexiconBackend::new(lexicon, templates)))
        }
        mode => {
            let remote_path = cfg.remote.as_ref().ok_or_else(|| {
                CampaignError::Config("remote backend config required for this mode".into())
            })?;
            let remote_cfg = RemoteConfig::load(remote_path)
                .map_err(|e| CampaignError::Config(e.to_string()))?;
            let backend = match mode {
                BackendMode::Replay => {
                    let cassette_path = cfg.cassette.as_ref().ok_or_else(|| {
                        CampaignError::Config("replay mode needs a cassette".into())
                    })?;
                    let cassette = Cassette::replay(cassette_path)
                        .map_err(|e| CampaignError::Config(e.to_string()))?;
                    RemoteBackend::replay(remote_cfg, cassette)
                }
                BackendMode::Record => {
                    let cassette_path = cfg.cassette.as_ref().ok_or_else(|| {
                        CampaignError::Config("record mode needs a cassette".into())
                    })?;
                    let cassette = Cassette::record(cassette_path)
                        .map_err(|e| CampaignError::Config(e.to_string()))?;
                    let timeout = std::time::Duration::from_secs(remote_cfg.timeout_secs);
                    let transport = HttpTransport::new(timeout)
                        .map_err(|e| CampaignError::Config(e.to_string()))?;
                    RemoteBackend::new(remote_cfg, Arc::new(transport), Some(cassette))
                }
                BackendMode::Passthrough => {
                    let timeout = std::time::Duration::from_secs(remote_cfg.timeout_secs);
                    let transport = HttpTransport::new(timeout)
                        .map_err(|e| CampaignError::Config(e.to_string()))?;
                    RemoteBackend::new(remote_cfg, Arc::new(transport), None)
                }
                BackendMode::Lexicon => unreachable!(),
            };
            Ok(Arc::new(backend))
        }
    }
}

/// Runs a campaign against the simulated targets named in the config.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<RunSummary, CampaignError> {
    let lexicon = Arc::new(
        Lexicon::load(&cfg.lexicon).map_err(|e| CampaignError::Config(e.to_string()))?,
    );
    let world = Arc::new(
        ScenarioWorld::load(&cfg.scenario).map_err(|e| CampaignError::Config(e.to_string()))?,
    );
    let profile_set = ProfileSet::load(&cfg.profiles_file)
        .map_err(|e| CampaignError::Config(e.to_string()))?;
    let mut targets: Vec<Arc<dyn Target>> = Vec::new();
    for name in &cfg.profiles {
        let profile = profile_set
            .get(name)
            .map_err(|e| CampaignError::Config(e.to_string()))?
            .clone();
        targets.push(Arc::new(SimTarget {
            world: world.clone(),
            profile,
            lexicon: lexicon.clone(),
        }));
    }
    run_campaign_with_targets(cfg, targets, lexicon, &world.version)
}

/// Runs a campaign against caller-supplied targets (one per profile name).
pub fn run_campaign_with_targets(
    cfg: &CampaignConfig,
    targets: Vec<Arc<dyn Target>>,
    lexicon: Arc<Lexicon>,
    scenario_version: &str,
) -> Result<RunSummary, CampaignError> {
    cfg.validate()?;
    let backend = build_backend(cfg, lexicon.clone())?;
    let prompts = ingest_dataset(&cfg.dataset)?;

    std::fs::create_dir_all(&cfg.output_dir)?;
    let provenance = Provenance {
        config_hash: cfg.config_hash(),
        lexicon_version: lexicon.version.clone(),
        scenario_version: scenario_version.to_string(),
        base_seed: cfg.base_seed,
    };
    let log_path = cfg.output_dir.join("results.jsonl");
    let log = ResultLog::open(&log_path, &provenance)?;

    let target_map: BTreeMap<String, Arc<dyn Target>> = targets
        .into_iter()
        .map(|t| (t.name().to_string(), t))
        .collect();
    for name in &cfg.profiles {
        if !target_map.contains_key(name) {
            return Err(CampaignError::Config(format!("no target for profile `{name}`")));
        }
    }

    // canonical task order: profile, then variant, then prompt, then attempt
    let mut tasks = Vec::new();
    let mut skipped = 0usize;
    let mut index = 0usize;
    for profile in &cfg.profiles {
        for &variant in &cfg.variants {
            for prompt in &prompts {
                for attempt in 0..cfg.attempts {
                    let seed = derive_seed(cfg.base_seed, &prompt.id, variant, profile, attempt);
                    let key = (prompt.id.clone(), variant, profile.clone(), seed);
                    if log.completed(&key) {
                        skipped += 1;
                    } else {
                        tasks.push(Task {
                            index,
                            prompt: prompt.clone(),
                            variant,
                            profile: profile.clone(),
                            seed,
                        });
                        index += 1;
                    }
                }
            }
        }
    }
    let total_tasks = tasks.len() + skipped;

    let engine = Engine {
        lexicon,
        backend,
        targets: target_map,
        frames: cfg.frames,
        budget: cfg.budget,
        render_template: cfg.render_template.clone(),
    };

    let mut written = 0usize;
    let mut successes = 0usize;
    let mut failures = 0usize;
    let workers = cfg.max_in_flight.max(1).min(tasks.len().max(1));

    if workers <= 1 {
        for task in &tasks {
            let record = engine.execute(task);
            successes += usize::from(record.success);
            failures += usize::from(record.failure.is_some());
            written += usize::from(log.append(&record)?);
        }
    } else {
        let cursor = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<(usize, AttackRecord)>();
        let tasks_ref = &tasks;
        let engine_ref = &engine;
        let result: Result<(usize, usize, usize), LogError> = std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let cursor = &cursor;
                scope.spawn(move || loop {
                    let i = cursor.fetch_add(1, Ordering::SeqCst);
                    if i >= tasks_ref.len() {
                        break;
                    }
                    let record = engine_ref.execute(&tasks_ref[i]);
                    if tx.send((tasks_ref[i].index, record)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            // write in canonical task order so complete runs are byte-identical
            let mut buffer: BTreeMap<usize, AttackRecord> = BTreeMap::new();
            let mut next = 0usize;
            let mut counts = (0usize, 0usize, 0usize);
            for (idx, record) in rx {
                buffer.insert(idx, record);
                while let Some(record) = buffer.remove(&next) {
                    counts.0 += usize::from(record.success);
                    counts.1 += usize::from(record.failure.is_some());
                    counts.2 += usize::from(log.append(&record)?);
                    next += 1;
                }
            }
            Ok(counts)
        });
        let (s, f, w) = result?;
        successes = s;
        failures = f;
        written = w;
    }

    Ok(RunSummary {
        total_tasks,
        skipped,
        written,
        successes,
        failures,
        log_path,
    })
}
