use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::catalog::AssetCatalog;
use crate::ops::{
    apply, AddPlacement, DependencyAnnotation, DependencyKind, EditOp, OpKind, OpParams, ReferenceSlot, TranslateMode,
};
use crate::rng::Rng;
use crate::scene::{ExecutedOpRecord, InitialEntry, ObjectId, SceneState};
use crate::text::{reference_matches, ReferencePhrase};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterReason {
    Ok,
    TransientStateDependency,
    AmbiguousPositionReference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub accepted: bool,
    pub reason: FilterReason,
}

impl FilterVerdict {
    const OK: FilterVerdict = FilterVerdict { accepted: true, reason: FilterReason::Ok };

    fn reject(reason: FilterReason) -> FilterVerdict {
        FilterVerdict { accepted: false, reason }
    }
}

fn is_transform(kind: OpKind) -> bool {
    matches!(kind, OpKind::Translate | OpKind::Rotate | OpKind::SizeChange)
}

/// Objects introduced by add or replace within `log`.
fn created_in(log: &[ExecutedOpRecord]) -> Vec<ObjectId> {
    log.iter()
        .filter(|r| matches!(r.op.kind(), OpKind::Add | OpKind::Replace))
        .filter_map(|r| r.created_id)
        .collect()
}

/// Whether running `params` after `log` would transform an object whose
/// pose only ever existed mid-chain.
pub fn is_transient_transform(log: &[ExecutedOpRecord], params: &OpParams) -> bool {
    is_transform(params.kind()) && params.target().is_some_and(|t| created_in(log).contains(&t))
}

/// Rejects chains whose later steps hinge on states a single composite
/// instruction cannot pin down.
pub fn filter_chain(log: &[ExecutedOpRecord], initial: &BTreeMap<ObjectId, InitialEntry>) -> FilterVerdict {
    for (i, rec) in log.iter().enumerate() {
        if is_transient_transform(&log[..i], &rec.op.params) {
            return FilterVerdict::reject(FilterReason::TransientStateDependency);
        }
        let Some(dep) = &rec.op.dependency else { continue };
        if dep.referenced_op_index >= i {
            return FilterVerdict::reject(FilterReason::TransientStateDependency);
        }
        if dep.kind == DependencyKind::PositionReference {
            let original = initial.get(&dep.referenced_object).map(|e| e.position);
            if original.is_none() || rec.op.params.coordinate() != original {
                return FilterVerdict::reject(FilterReason::AmbiguousPositionReference);
            }
        }
    }
    FilterVerdict::OK
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("no eligible reference")]
pub struct NoEligibleReference;

fn with_slot(params: &OpParams, slot: ReferenceSlot, id: ObjectId) -> OpParams {
    let mut p = params.clone();
    match (&mut p, slot) {
        (
            OpParams::Remove { target }
            | OpParams::Translate { target, .. }
            | OpParams::Rotate { target, .. }
            | OpParams::Replace { target, .. }
            | OpParams::ColorChange { target, .. }
            | OpParams::MaterialChange { target, .. }
            | OpParams::SizeChange { target, .. },
            ReferenceSlot::Target,
        ) => *target = id,
        (
            OpParams::Add { placement: AddPlacement::OnSupporter { anchor } | AddPlacement::NearObject { anchor }, .. }
            | OpParams::Translate { mode: TranslateMode::NearObject { anchor } | TranslateMode::OntoObject { anchor }, .. },
            ReferenceSlot::Anchor,
        ) => *anchor = id,
        _ => {}
    }
    p
}

/// The shortest phrase that singles out `subject`, with the step it points at.
fn unique_phrase(state: &SceneState, subject: ObjectId, step: usize) -> Option<(usize, Option<String>)> {
    let trace = state.op_log[step].trace.as_ref()?;
    if !trace.action.needs_qualifier() {
        let bare = ReferencePhrase { action: trace.action, qualifier: None };
        if let [(id, at)] = reference_matches(state, &bare).as_slice() {
            if *id == subject {
                return Some((*at, None));
            }
        }
    }
    let q = trace.qualifier.clone()?;
    if !q.is_complete() {
        return None;
    }
    let text = q.render();
    let full = ReferencePhrase { action: trace.action, qualifier: Some(q) };
    match reference_matches(state, &full).as_slice() {
        [(id, at)] if *id == subject => Some((*at, Some(text))),
        _ => None,
    }
}

fn operation_reference(state: &SceneState, op: &EditOp, rng: &mut Rng, catalog: &AssetCatalog) -> Option<EditOp> {
    let mut slots = Vec::new();
    if op.params.target().is_some() {
        slots.push(ReferenceSlot::Target);
    }
    if op.params.anchor().is_some() {
        slots.push(ReferenceSlot::Anchor);
    }
    let mut subjects: Vec<(ObjectId, usize)> = Vec::new();
    for (i, rec) in state.op_log.iter().enumerate() {
        if let Some(t) = &rec.trace {
            if state.objects.contains_key(&t.subject) {
                subjects.push((t.subject, i));
            }
        }
    }
    let mut pairs: Vec<(ReferenceSlot, ObjectId, usize)> =
        slots.iter().flat_map(|s| subjects.iter().map(move |(id, i)| (*s, *id, *i))).collect();
    pairs.shuffle(rng);
    // Prefer describing the object the op already acts on over retargeting.
    let current = |s: ReferenceSlot| match s {
        ReferenceSlot::Target => op.params.target(),
        _ => op.params.anchor(),
    };
    pairs.sort_by_key(|(s, id, _)| current(*s) != Some(*id));
    for (slot, subject, step) in pairs {
        let Some((at, disambiguator)) = unique_phrase(state, subject, step) else { continue };
        let params = with_slot(&op.params, slot, subject);
        if is_transient_transform(&state.op_log, &params) {
            continue;
        }
        let mut out = op.clone();
        out.params = params;
        out.dependency = Some(DependencyAnnotation {
            kind: DependencyKind::OperationReference,
            referenced_op_index: at,
            referenced_object: subject,
            disambiguator,
            slot,
        });
        if apply(state, &out, catalog).is_ok() {
            return Some(out);
        }
    }
    None
}

/// Initial objects that have since been moved or removed, with the step
/// that did it.
fn displaced_originals(state: &SceneState) -> Vec<(ObjectId, usize)> {
    let mut out = Vec::new();
    for (id, entry) in &state.initial {
        let moved = match state.objects.get(id) {
            None => true,
            Some(o) => o.position.x != entry.position.x || o.position.y != entry.position.y,
        };
        if !moved {
            continue;
        }
        let step = state.op_log.iter().rposition(|r| {
            matches!(r.op.kind(), OpKind::Remove | OpKind::Translate) && r.op.params.target() == Some(*id)
        });
        if let Some(step) = step {
            out.push((*id, step));
        }
    }
    out
}

fn position_reference(state: &SceneState, op: &EditOp, rng: &mut Rng, catalog: &AssetCatalog) -> Option<EditOp> {
    let mut sources = displaced_originals(state);
    sources.shuffle(rng);
    for (source, step) in sources {
        let position = state.initial[&source].position;
        let params = match &op.params {
            OpParams::Add { label, .. } => {
                OpParams::Add { label: label.clone(), placement: AddPlacement::AtCoordinate { position } }
            }
            OpParams::Translate { target, .. } if *target != source => {
                OpParams::Translate { target: *target, mode: TranslateMode::AtCoordinate { position } }
            }
            _ => continue,
        };
        if is_transient_transform(&state.op_log, &params) {
            continue;
        }
        let mut out = op.clone();
        out.params = params;
        out.dependency = Some(DependencyAnnotation {
            kind: DependencyKind::PositionReference,
            referenced_op_index: step,
            referenced_object: source,
            disambiguator: None,
            slot: ReferenceSlot::Position,
        });
        if apply(state, &out, catalog).is_ok_and(|o| o.record.slots.contains_key("source")) {
            return Some(out);
        }
    }
    None
}

/// Rewrites `op` so it refers back to the history in `state`.
///
/// Operation references describe the target or anchor by an earlier action;
/// position references send an add or move to an object's initial spot. When
/// both are possible each is tried first with equal probability.
pub fn inject_dependency(
    op: &EditOp,
    state: &SceneState,
    rng: &mut Rng,
    catalog: &AssetCatalog,
) -> Result<EditOp, NoEligibleReference> {
    if state.op_log.is_empty() || !op.kind().dependency_eligible() {
        return Err(NoEligibleReference);
    }
    let positional = matches!(op.kind(), OpKind::Add | OpKind::Translate) && !displaced_originals(state).is_empty();
    let position_first = positional && rng.random_bool(0.5);
    let first = if position_first {
        position_reference(state, op, rng, catalog)
    } else {
        operation_reference(state, op, rng, catalog)
    };
    if let Some(op) = first {
        return Ok(op);
    }
    let second = if position_first {
        operation_reference(state, op, rng, catalog)
    } else if positional {
        position_reference(state, op, rng, catalog)
    } else {
        None
    };
    second.ok_or(NoEligibleReference)
}
