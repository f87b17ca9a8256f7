use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

use super::*;
use crate::catalog::{AssetCatalog, TextureId};
use crate::rng::Rng;
use crate::scene::{fits_safe_size, SceneState};

/// Parameter draws tried per kind before the kind counts as infeasible.
pub const PARAM_ATTEMPTS: usize = 4;

/// Labels that may be introduced into `state` by add or replace.
pub fn novel_labels<'a>(state: &SceneState, catalog: &'a AssetCatalog) -> Vec<&'a str> {
    let used = state.used_labels();
    catalog
        .entries
        .iter()
        .filter(|e| fits_safe_size(e, &state.limits) && !used.contains(&e.label))
        .map(|e| e.label.as_str())
        .collect()
}

fn free_targets(state: &SceneState) -> Vec<ObjectId> {
    state.objects.values().filter(|o| o.supporter_of.is_empty()).map(|o| o.id).collect()
}

fn supporters(state: &SceneState, except: Option<ObjectId>) -> Vec<ObjectId> {
    state
        .objects
        .values()
        .filter(|o| o.is_supporter && Some(o.id) != except)
        .map(|o| o.id)
        .collect()
}

fn floor_objects(state: &SceneState, except: Option<ObjectId>) -> Vec<ObjectId> {
    state.floor_objects().filter(|o| Some(o.id) != except).map(|o| o.id).collect()
}

/// One uniform draw from the legal parameter space of `kind`, or `None` if
/// the space is empty in this state.
pub fn sample_params(state: &SceneState, kind: OpKind, rng: &mut Rng, catalog: &AssetCatalog) -> Option<OpParams> {
    match kind {
        OpKind::Add => {
            let label = novel_labels(state, catalog).choose(rng)?.to_string();
            let sups = supporters(state, None);
            let floor = floor_objects(state, None);
            let mut modes = Vec::new();
            if !sups.is_empty() {
                modes.push(0);
            }
            if !floor.is_empty() {
                modes.push(1);
            }
            let placement = match modes.choose(rng)? {
                0 => AddPlacement::OnSupporter { anchor: *sups.choose(rng)? },
                _ => AddPlacement::NearObject { anchor: *floor.choose(rng)? },
            };
            Some(OpParams::Add { label, placement })
        }
        OpKind::Remove => Some(OpParams::Remove { target: *free_targets(state).choose(rng)? }),
        OpKind::Translate => {
            let target = *free_targets(state).choose(rng)?;
            let mode = match rng.random_range(0..3) {
                0 => TranslateMode::ByDirection { direction: *Direction::ALL.choose(rng)? },
                1 => TranslateMode::NearObject { anchor: *floor_objects(state, Some(target)).choose(rng)? },
                _ => {
                    let current = state.objects[&target].supported_by;
                    let others: Vec<_> = supporters(state, Some(target)).into_iter().filter(|s| Some(*s) != current).collect();
                    TranslateMode::OntoObject { anchor: *others.choose(rng)? }
                }
            };
            Some(OpParams::Translate { target, mode })
        }
        OpKind::Rotate => {
            let target = *free_targets(state).choose(rng)?;
            let degrees = *ROTATION_DEGREES.choose(rng)?;
            let mut direction = if rng.random_bool(0.5) { RotationDirection::Cw } else { RotationDirection::Ccw };
            if degrees == 180 {
                direction = RotationDirection::Ccw;
            }
            Some(OpParams::Rotate { target, degrees, direction })
        }
        OpKind::Replace => {
            let target = *free_targets(state).choose(rng)?;
            let new_label = novel_labels(state, catalog).choose(rng)?.to_string();
            Some(OpParams::Replace { target, new_label })
        }
        OpKind::ColorChange => {
            let ids: Vec<ObjectId> = state.objects.keys().copied().collect();
            let target = *ids.choose(rng)?;
            let current = state.objects[&target].color;
            let options: Vec<_> = crate::catalog::ColorName::ALL.iter().filter(|c| **c != current).collect();
            Some(OpParams::ColorChange { target, color: **options.choose(rng)? })
        }
        OpKind::MaterialChange => {
            let ids: Vec<ObjectId> = state.objects.keys().copied().collect();
            let target = *ids.choose(rng)?;
            let current = state.objects[&target].material;
            let options: Vec<_> = crate::catalog::MaterialName::ALL.iter().filter(|m| **m != current).collect();
            Some(OpParams::MaterialChange { target, material: **options.choose(rng)? })
        }
        OpKind::SizeChange => {
            let target = *free_targets(state).choose(rng)?;
            Some(OpParams::SizeChange { target, scale: *SCALE_FACTORS.choose(rng)? })
        }
        OpKind::ViewpointChange => {
            let motion = *CameraMotion::ALL.choose(rng)?;
            let direction = *motion.directions().choose(rng)?;
            Some(OpParams::viewpoint(motion, direction))
        }
        OpKind::BackgroundChange => {
            let scope = if rng.random_bool(0.5) { BackgroundScope::FloorOnly } else { BackgroundScope::FloorAndWalls };
            let room = &state.room;
            let options: Vec<TextureId> = TextureId::ALL
                .iter()
                .copied()
                .filter(|t| {
                    *t != room.floor_texture && (scope == BackgroundScope::FloorOnly || *t != room.wall_texture)
                })
                .collect();
            Some(OpParams::BackgroundChange { scope, texture: *options.choose(rng)? })
        }
    }
}

/// Samples a feasible op: kinds are tried in random order (so the kind is
/// uniform over the feasible ones), each with up to [`PARAM_ATTEMPTS`]
/// parameter draws verified by a dry-run apply.
pub fn sample_op(state: &SceneState, rng: &mut Rng, allowed: &[OpKind], catalog: &AssetCatalog) -> Result<EditOp, OpError> {
    sample_op_where(state, rng, allowed, catalog, |_| true)
}

/// Like [`sample_op`], additionally rejecting params for which `keep` is false.
pub fn sample_op_where(
    state: &SceneState,
    rng: &mut Rng,
    allowed: &[OpKind],
    catalog: &AssetCatalog,
    mut keep: impl FnMut(&OpParams) -> bool,
) -> Result<EditOp, OpError> {
    let mut kinds = allowed.to_vec();
    kinds.shuffle(rng);
    for kind in kinds {
        for _ in 0..PARAM_ATTEMPTS {
            let Some(params) = sample_params(state, kind, rng, catalog) else { break };
            if !keep(&params) {
                continue;
            }
            let op = EditOp::new(params, rng.random());
            if apply(state, &op, catalog).is_ok() {
                return Ok(op);
            }
        }
    }
    Err(OpError::NoFeasibleOp)
}
