//! Replay-based stand-in for a holistic judge: compare what a candidate did
//! to the scene with what the reference chain demanded, field by field.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use editforge_core::catalog::AssetCatalog;
use editforge_core::chain::ChainRecord;
use editforge_core::geometry::Vec3;
use editforge_core::ops::{apply, EditOp, OpKind};
use editforge_core::scene::{ObjectId, SceneState};
use editforge_core::text::{parse_instruction, resolve_params, TemplateLibrary};
use serde::{Deserialize, Serialize};

pub const POSITION_TOLERANCE: f64 = 0.05;
pub const ANGLE_TOLERANCE: f64 = 1.0;
/// Weight of each unintended change against correct ones.
pub const UNINTENDED_PENALTY: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "snake_case")]
pub enum Entity {
    Object(ObjectId),
    Camera,
    Room,
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::Object(id) => write!(f, "object {id}"),
            Entity::Camera => f.write_str("camera"),
            Entity::Room => f.write_str("room"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Field {
    Label,
    Position,
    Yaw,
    Scale,
    Color,
    Material,
    Pitch,
    Floor,
    Wall,
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Point(Vec3),
    Angle(f64),
    Number(f64),
    Name(String),
}

impl Value {
    fn matches(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Point(a), Value::Point(b)) => {
                (a.x - b.x).abs() <= POSITION_TOLERANCE
                    && (a.y - b.y).abs() <= POSITION_TOLERANCE
                    && (a.z - b.z).abs() <= POSITION_TOLERANCE
            }
            (Value::Angle(a), Value::Angle(b)) => {
                let d = (a - b).rem_euclid(360.0);
                d.min(360.0 - d) <= ANGLE_TOLERANCE
            }
            (Value::Number(a), Value::Number(b)) => (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0),
            (Value::Name(a), Value::Name(b)) => a == b,
            _ => false,
        }
    }
}

type Facts = BTreeMap<(Entity, Field), Value>;

fn name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Observable world facts; an absent object contributes none.
fn facts(state: &SceneState, ids: &BTreeMap<ObjectId, ObjectId>) -> Facts {
    let mut out = Facts::new();
    for o in state.objects.values() {
        let e = Entity::Object(ids.get(&o.id).copied().unwrap_or(o.id));
        out.insert((e, Field::Label), Value::Name(o.label.clone()));
        out.insert((e, Field::Position), Value::Point(o.position));
        out.insert((e, Field::Yaw), Value::Angle(o.yaw));
        out.insert((e, Field::Scale), Value::Number(o.scale));
        out.insert((e, Field::Color), Value::Name(name(&o.color)));
        out.insert((e, Field::Material), Value::Name(name(&o.material)));
    }
    let c = &state.camera;
    out.insert((Entity::Camera, Field::Position), Value::Point(c.position));
    out.insert((Entity::Camera, Field::Yaw), Value::Angle(c.yaw));
    out.insert((Entity::Camera, Field::Pitch), Value::Angle(c.pitch));
    out.insert((Entity::Room, Field::Floor), Value::Name(name(&state.room.floor_texture)));
    out.insert((Entity::Room, Field::Wall), Value::Name(name(&state.room.wall_texture)));
    out
}

fn same(a: Option<&Value>, b: Option<&Value>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => x.matches(y),
        _ => false,
    }
}

fn changed_keys(before: &Facts, after: &Facts) -> BTreeSet<(Entity, Field)> {
    before
        .keys()
        .chain(after.keys())
        .filter(|k| !same(before.get(k), after.get(k)))
        .copied()
        .collect()
}

/// Maps objects the candidate created onto reference-created objects with
/// the same label (labels are unique within a scene); other created objects
/// get ids no reference object uses.
fn align_created(init: &SceneState, reference: &[SceneState], candidate: &SceneState) -> BTreeMap<ObjectId, ObjectId> {
    let mut by_label: BTreeMap<&str, ObjectId> = BTreeMap::new();
    let mut top = 0;
    for s in reference {
        for o in s.objects.values() {
            top = top.max(o.id.0);
            if !init.objects.contains_key(&o.id) {
                by_label.entry(o.label.as_str()).or_insert(o.id);
            }
        }
    }
    // Prefer the object that survives to the end of the chain.
    if let Some(last) = reference.last() {
        for o in last.objects.values().filter(|o| !init.objects.contains_key(&o.id)) {
            by_label.insert(o.label.as_str(), o.id);
        }
    }
    let mut out = BTreeMap::new();
    let mut fresh = top.max(candidate.next_id) + 1;
    for o in candidate.objects.values().filter(|o| !init.objects.contains_key(&o.id)) {
        let id = by_label.get(o.label.as_str()).copied().unwrap_or_else(|| {
            fresh += 1;
            ObjectId(fresh)
        });
        out.insert(o.id, id);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Correct,
    Missing,
    Wrong,
    Unintended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Reference step, absent for unintended changes.
    pub step: Option<usize>,
    pub op: Option<OpKind>,
    pub subject: Option<String>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicScore {
    pub sym_score: f64,
    pub correct: usize,
    pub missing: usize,
    pub wrong: usize,
    pub unintended: usize,
    pub verdicts: Vec<Verdict>,
    /// Candidate instructions that failed to parse, resolve or apply.
    pub failed_steps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("reference chain does not replay: {0}")]
    ReferenceReplay(String),
}

/// Scores the final state a candidate reached against the reference chain.
pub fn score_state(reference: &ChainRecord, candidate: &SceneState, catalog: &AssetCatalog) -> Result<SymbolicScore, ScoreError> {
    score_inner(reference, candidate, catalog, Vec::new())
}

/// Parses candidate instructions (one string per step or chunk), resolves
/// each against the state it applies to and replays it on the reference's
/// initial scene. Steps that fail are skipped and reported.
pub fn score_instructions<S: AsRef<str>>(
    reference: &ChainRecord,
    texts: &[S],
    catalog: &AssetCatalog,
    lib: &TemplateLibrary,
) -> Result<SymbolicScore, ScoreError> {
    let (state, failed) = replay_instructions(&reference.init_state, texts, catalog, lib);
    score_inner(reference, &state, catalog, failed)
}

pub fn replay_instructions<S: AsRef<str>>(
    init: &SceneState,
    texts: &[S],
    catalog: &AssetCatalog,
    lib: &TemplateLibrary,
) -> (SceneState, Vec<String>) {
    let mut state = init.clone();
    let mut failed = Vec::new();
    for text in texts {
        let text = text.as_ref();
        for parsed in parse_instruction(text, lib) {
            let step = parsed
                .map_err(|e| e.to_string())
                .and_then(|p| resolve_params(&state, &p.params).map_err(|e| format!("{:?}: {e}", &text[p.raw_span])))
                .and_then(|params| apply(&state, &EditOp::new(params, 0), catalog).map_err(|e| e.to_string()));
            match step {
                Ok(out) => state = out.new_state,
                Err(e) => failed.push(e),
            }
        }
    }
    (state, failed)
}

/// Steps whose effect survives to the end of the chain: each is the last
/// to change at least one field it touched. Dropping such a step from a
/// perfect candidate always costs score; dropping another may not.
pub fn observable_steps(reference: &ChainRecord, catalog: &AssetCatalog) -> Result<Vec<bool>, ScoreError> {
    let states = reference.replay(catalog).map_err(|e| ScoreError::ReferenceReplay(e.to_string()))?;
    let none = BTreeMap::new();
    let f: Vec<Facts> = states.iter().map(|s| facts(s, &none)).collect();
    let keys: Vec<_> = (0..reference.len()).map(|i| changed_keys(&f[i], &f[i + 1])).collect();
    Ok((0..keys.len()).map(|i| keys[i].iter().any(|k| keys[i + 1..].iter().all(|later| !later.contains(k)))).collect())
}

fn score_inner(
    reference: &ChainRecord,
    candidate: &SceneState,
    catalog: &AssetCatalog,
    failed_steps: Vec<String>,
) -> Result<SymbolicScore, ScoreError> {
    let states = reference.replay(catalog).map_err(|e| ScoreError::ReferenceReplay(e.to_string()))?;
    let init = &reference.init_state;
    let none = BTreeMap::new();
    let ref_facts: Vec<Facts> = states.iter().map(|s| facts(s, &none)).collect();
    let (start, goal) = (&ref_facts[0], ref_facts.last().expect("initial state"));
    let got = facts(candidate, &align_created(init, &states, candidate));

    let mut demanded = BTreeSet::new();
    let mut verdicts = Vec::new();
    let (mut correct, mut missing, mut wrong) = (0, 0, 0);
    for (i, op) in reference.ops.iter().enumerate() {
        let keys = changed_keys(&ref_facts[i], &ref_facts[i + 1]);
        demanded.extend(keys.iter().copied());
        let matched = keys.iter().all(|k| same(got.get(k), goal.get(k)));
        // Keys whose end value differs from the start are the op's visible effect.
        let visible: Vec<_> = keys.iter().filter(|k| !same(start.get(k), goal.get(k))).collect();
        let untouched = !visible.is_empty() && visible.iter().all(|k| same(got.get(k), start.get(k)));
        let status = if matched {
            correct += 1;
            Status::Correct
        } else if untouched {
            missing += 1;
            Status::Missing
        } else {
            wrong += 1;
            Status::Wrong
        };
        let subject = keys.iter().next().map(|(e, _)| e.to_string());
        verdicts.push(Verdict { step: Some(i), op: Some(op.kind()), subject, status });
    }
    let stray: BTreeSet<Entity> =
        changed_keys(start, &got).into_iter().filter(|k| !demanded.contains(k)).map(|(e, _)| e).collect();
    for e in &stray {
        verdicts.push(Verdict { step: None, op: None, subject: Some(e.to_string()), status: Status::Unintended });
    }
    let len = reference.len().max(1) as f64;
    let raw = 10.0 * (correct as f64 - UNINTENDED_PENALTY * stray.len() as f64).max(0.0) / len;
    Ok(SymbolicScore {
        sym_score: raw.clamp(0.0, 10.0),
        correct,
        missing,
        wrong,
        unintended: stray.len(),
        verdicts,
        failed_steps,
    })
}
