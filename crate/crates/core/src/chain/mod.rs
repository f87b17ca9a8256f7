//! Editing chains: composition, dependency injection, filtering and chunking.

mod chunks;
mod dependency;

pub use chunks::*;
pub use dependency::*;

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::catalog::AssetCatalog;
use crate::ops::{apply, sample_op_where, EditOp, OpError, OpKind};
use crate::render::FrameRef;
use crate::rng::SeedStream;
use crate::scene::SceneState;
use crate::text::{parse_instruction, render_forms, resolve_params, InstructionDoc, TemplateLibrary, TextError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComposerConfig {
    pub min_length: usize,
    pub max_length: usize,
    /// Per-step probability of attempting a dependency.
    pub dependency_probability: f64,
    pub enable_dependencies: bool,
    /// Resample whole chains until at least one step carries a dependency.
    pub require_dependency: bool,
    /// Sampling failures tolerated at one step.
    pub retry_budget: usize,
    /// Chunk counts planned for every chain (those above its length are skipped).
    pub chunk_counts: Vec<usize>,
    pub seed: u64,
}

impl Default for ComposerConfig {
    fn default() -> Self {
        ComposerConfig {
            min_length: 3,
            max_length: 17,
            dependency_probability: 0.5,
            enable_dependencies: true,
            require_dependency: false,
            retry_budget: 32,
            chunk_counts: vec![1, 2, 3],
            seed: 0,
        }
    }
}

impl ComposerConfig {
    pub fn validate(&self) -> Result<(), ChainError> {
        if self.min_length < 1 || self.min_length > self.max_length {
            return Err(ChainError::InvalidConfig(format!(
                "need 1 <= min_length <= max_length, got {}..{}",
                self.min_length, self.max_length
            )));
        }
        if !(0.0..=1.0).contains(&self.dependency_probability) {
            return Err(ChainError::InvalidConfig("dependency_probability must lie in [0, 1]".into()));
        }
        if self.retry_budget == 0 {
            return Err(ChainError::InvalidConfig("retry_budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChainError {
    #[error("no feasible op at step {step}")]
    CompositionExhausted { step: usize },
    #[error("invalid composer config: {0}")]
    InvalidConfig(String),
    #[error("chunk count {k} invalid for length {len}")]
    BadK { k: usize, len: usize },
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("replay failed: {0}")]
    Replay(#[from] OpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub id: String,
    pub seed: u64,
    pub init_state: SceneState,
    pub ops: Vec<EditOp>,
    pub step_instructions: Vec<String>,
    pub composite_instruction: String,
    pub instructions: InstructionDoc,
    /// Filled in by the renderer; empty until frames are written.
    #[serde(default)]
    pub frames: Vec<FrameRef>,
    pub dependency_ratio: f64,
    pub chunk_plans: BTreeMap<usize, ChunkPlan>,
}

impl ChainRecord {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// States I_0..I_L obtained by replaying the ops.
    pub fn replay(&self, catalog: &AssetCatalog) -> Result<Vec<SceneState>, OpError> {
        let mut states = vec![self.init_state.clone()];
        for op in &self.ops {
            let next = apply(states.last().expect("nonempty"), op, catalog)?.new_state;
            states.push(next);
        }
        Ok(states)
    }
}

/// Whether the complex form of the step just applied parses and resolves
/// back to the same parameters against the state it ran in.
fn reference_round_trips(lib: &TemplateLibrary, before: &SceneState, after: &SceneState) -> bool {
    let Some(rec) = after.op_log.last() else { return false };
    let Ok(forms) = render_forms(lib, rec, &before.op_log) else { return false };
    match parse_instruction(&forms.complex_form, lib).as_slice() {
        [Ok(p)] => resolve_params(before, &p.params).is_ok_and(|params| params == rec.op.params),
        _ => false,
    }
}

fn compose_once(
    init: &SceneState,
    cfg: &ComposerConfig,
    catalog: &AssetCatalog,
    lib: &TemplateLibrary,
    stream: SeedStream,
) -> Result<SceneState, ChainError> {
    let mut rng = stream.child("steps", 0).rng();
    let len = rng.random_range(cfg.min_length..=cfg.max_length);
    let mut state = init.clone();
    for step in 0..len {
        let mut next = None;
        for _ in 0..cfg.retry_budget {
            let log = &state.op_log;
            let op = match sample_op_where(&state, &mut rng, &OpKind::ALL, catalog, |p| !is_transient_transform(log, p)) {
                Ok(op) => op,
                Err(_) => continue,
            };
            let wants_dependency =
                step > 0 && cfg.enable_dependencies && rng.random_bool(cfg.dependency_probability);
            if wants_dependency && op.kind().dependency_eligible() {
                if let Ok(dep) = inject_dependency(&op, &state, &mut rng, catalog) {
                    if let Ok(out) = apply(&state, &dep, catalog) {
                        if reference_round_trips(lib, &state, &out.new_state) {
                            next = Some(out.new_state);
                            break;
                        }
                    }
                }
            }
            if let Ok(out) = apply(&state, &op, catalog) {
                next = Some(out.new_state);
                break;
            }
        }
        state = next.ok_or(ChainError::CompositionExhausted { step })?;
    }
    Ok(state)
}

/// Maximum whole-chain resamples when a dependency is required.
const DEPENDENT_ATTEMPTS: u64 = 64;

/// Samples a chain from `init`. The chain's randomness comes entirely from
/// `cfg.seed`.
pub fn compose_chain(
    init: &SceneState,
    cfg: &ComposerConfig,
    catalog: &AssetCatalog,
    lib: &TemplateLibrary,
) -> Result<ChainRecord, ChainError> {
    cfg.validate()?;
    let base = SeedStream(cfg.seed).child("chain", 0);
    let mut last_err = None;
    for attempt in 0..DEPENDENT_ATTEMPTS {
        let stream = base.child("attempt", attempt);
        let end = match compose_once(init, cfg, catalog, lib, stream) {
            Ok(s) => s,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let log = &end.op_log[init.op_log.len()..];
        let dependent = log.iter().filter(|r| r.op.dependency.is_some()).count();
        if cfg.require_dependency && dependent == 0 {
            continue;
        }
        if !filter_chain(log, &end.initial).accepted {
            continue;
        }
        let doc = InstructionDoc::from_log(lib, log)?;
        let len = log.len();
        let mut plan_rng = stream.child("chunks", 0).rng();
        let mut chunk_plans = BTreeMap::new();
        for &k in &cfg.chunk_counts {
            if (1..=len).contains(&k) {
                chunk_plans.insert(k, plan_chunks(len, k, &mut plan_rng)?.with_instructions(&doc.step_texts));
            }
        }
        return Ok(ChainRecord {
            id: format!("{:016x}", cfg.seed),
            seed: cfg.seed,
            init_state: init.clone(),
            ops: log.iter().map(|r| r.op.clone()).collect(),
            step_instructions: doc.step_texts.clone(),
            composite_instruction: doc.complex_text.clone(),
            instructions: doc,
            frames: Vec::new(),
            dependency_ratio: dependent as f64 / len as f64,
            chunk_plans,
        });
    }
    Err(last_err.unwrap_or(ChainError::CompositionExhausted { step: 0 }))
}
