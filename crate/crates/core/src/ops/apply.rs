use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::*;
use crate::canonical::to_canonical_string;
use crate::catalog::{AssetCatalog, ColorName};
use crate::fmath::{atan2_deg, snap};
use crate::geometry::Aabb;
use crate::rng::{content_key, Rng};
use crate::scene::{
    all_visible, find_position_where, footprint_half_extents, is_free, EditTrace, ExecutedOpRecord,
    Footprint, PlacementRegion, SceneObject, SceneState, Snapshot,
};
use crate::text::{Qualifier, RefAction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpOutcome {
    pub new_state: SceneState,
    pub record: ExecutedOpRecord,
    pub instruction_slots: BTreeMap<String, String>,
}

/// In-progress mutation of a cloned state that remembers prior values.
struct Work {
    state: SceneState,
    snapshot: Snapshot,
    prior_positions: BTreeMap<ObjectId, Vec3>,
    affected: Vec<ObjectId>,
    created: Option<ObjectId>,
    slots: BTreeMap<String, String>,
    trace: Option<EditTrace>,
}

impl Work {
    fn new(state: &SceneState) -> Work {
        Work {
            state: state.clone(),
            snapshot: Snapshot { next_id: state.next_id, ..Snapshot::default() },
            prior_positions: BTreeMap::new(),
            affected: Vec::new(),
            created: None,
            slots: BTreeMap::new(),
            trace: None,
        }
    }

    /// Records the prior value of `id` before its first mutation.
    fn touch(&mut self, id: ObjectId) {
        if !self.snapshot.objects.contains_key(&id) {
            self.snapshot.objects.insert(id, self.state.objects.get(&id).cloned());
        }
        if !self.affected.contains(&id) {
            self.affected.push(id);
        }
    }

    fn obj(&mut self, id: ObjectId) -> &mut SceneObject {
        self.touch(id);
        self.state.objects.get_mut(&id).expect("touched object exists")
    }

    fn slot(&mut self, key: &str, value: impl Into<String>) {
        self.slots.insert(key.to_string(), value.into());
    }

    fn detach(&mut self, id: ObjectId) {
        if let Some(sup) = self.state.objects.get(&id).and_then(|o| o.supported_by) {
            self.obj(sup).supporter_of.remove(&id);
            self.obj(id).supported_by = None;
        }
    }

    fn attach(&mut self, id: ObjectId, supporter: ObjectId) {
        self.obj(supporter).supporter_of.insert(id);
        self.obj(id).supported_by = Some(supporter);
    }

    fn finish(mut self, op: &EditOp) -> OpOutcome {
        let record = ExecutedOpRecord {
            op: op.clone(),
            affected_ids: self.affected,
            created_id: self.created,
            prior_positions: self.prior_positions,
            prior_attributes: self.snapshot,
            slots: self.slots.clone(),
            trace: self.trace,
        };
        self.state.op_log.push(record.clone());
        OpOutcome { new_state: self.state, record, instruction_slots: self.slots }
    }
}

/// Draws used inside an op depend only on its parameters and the scene seed,
/// so replaying the same parameters reproduces the same placement.
fn op_rng(state: &SceneState, params: &OpParams) -> Rng {
    let text = to_canonical_string(params).expect("op params are finite");
    state.rng_cursor.child("op", content_key(text.as_bytes())).rng()
}

fn existing(state: &SceneState, id: ObjectId) -> Result<&SceneObject, OpError> {
    state.objects.get(&id).ok_or(OpError::TargetMissing)
}

fn anchor_of(state: &SceneState, id: ObjectId) -> Result<&SceneObject, OpError> {
    state.objects.get(&id).ok_or(OpError::AnchorMissing)
}

/// The top face of a supporter as a placement rectangle. Only supporters
/// turned by a multiple of 90 degrees have an axis-aligned top.
fn top_face(sup: &SceneObject) -> Option<Aabb> {
    if !sup.is_supporter || snap(sup.yaw.rem_euclid(90.0)) != 0.0 {
        return None;
    }
    let bb = sup.aabb();
    Some(Aabb::new(Vec3::new(bb.min.x, bb.min.y, bb.max.z), bb.max))
}

fn with_object(state: &SceneState, obj: SceneObject) -> SceneState {
    let mut s = state.clone();
    s.objects.insert(obj.id, obj);
    s
}

fn visible(state: &SceneState) -> bool {
    all_visible(state, &state.camera)
}

/// Label of the initial object whose recorded position is exactly `p`.
fn source_label(state: &SceneState, p: Vec3) -> Option<String> {
    state
        .initial
        .values()
        .find(|e| e.position.x == p.x && e.position.y == p.y)
        .map(|e| e.label.clone())
}

/// Whether `obj` would sit validly at its current pose: in the room, not
/// overlapping anything else, and inside its supporter's top if supported.
fn pose_ok(state: &SceneState, obj: &SceneObject) -> bool {
    let bb = obj.aabb();
    if !is_free(state, &bb, &[obj.id]) {
        return false;
    }
    match obj.supported_by.and_then(|s| state.objects.get(&s)) {
        Some(sup) => top_face(sup).is_some_and(|t| t.contains_xy(&bb)),
        None => true,
    }
}

pub fn apply(state: &SceneState, op: &EditOp, catalog: &AssetCatalog) -> Result<OpOutcome, OpError> {
    if op.op_schema != OP_SCHEMA {
        return Err(OpError::InvalidParams(format!("op_schema {}", op.op_schema)));
    }
    let mut w = Work::new(state);
    match &op.params {
        OpParams::Add { label, placement } => add(&mut w, op, label, placement, catalog)?,
        OpParams::Remove { target } => remove(&mut w, *target)?,
        OpParams::Translate { target, mode } => translate(&mut w, op, *target, mode)?,
        OpParams::Rotate { target, degrees, direction } => rotate(&mut w, *target, *degrees, *direction)?,
        OpParams::Replace { target, new_label } => replace(&mut w, *target, new_label, catalog)?,
        OpParams::ColorChange { target, color } => recolor(&mut w, *target, *color)?,
        OpParams::MaterialChange { target, material } => rematerial(&mut w, *target, *material)?,
        OpParams::SizeChange { target, scale } => resize(&mut w, *target, *scale)?,
        OpParams::ViewpointChange { motion, direction, magnitude } => {
            viewpoint(&mut w, *motion, *direction, *magnitude)?
        }
        OpParams::BackgroundChange { scope, texture } => background(&mut w, *scope, *texture)?,
    }
    Ok(w.finish(op))
}

fn add(w: &mut Work, op: &EditOp, label: &str, placement: &AddPlacement, catalog: &AssetCatalog) -> Result<(), OpError> {
    let entry = catalog.get(label).ok_or_else(|| OpError::UnknownLabel(label.to_string()))?;
    if w.state.find_label(label).is_some() {
        return Err(OpError::LabelNotNovel(label.to_string()));
    }
    let mut rng = op_rng(&w.state, &op.params);
    let yaw = 15.0 * rng.random_range(0..24) as f64;
    let (hx, hy) = footprint_half_extents(entry.shape, entry.base_size, yaw);
    let fp = Footprint { hx, hy, height: entry.base_size.z };
    let id = ObjectId(w.state.next_id);
    let probe = |state: &SceneState, x: f64, y: f64, z: f64| {
        let obj = SceneObject::from_entry(id, entry, Vec3::new(x, y, z), yaw);
        visible(&with_object(state, obj))
    };
    let (x, y, z, supporter, qualifier) = match placement {
        AddPlacement::OnSupporter { anchor } => {
            let sup = anchor_of(&w.state, *anchor)?.clone();
            if !sup.is_supporter {
                return Err(OpError::InvalidParams(format!("{} is not a supporter", sup.label)));
            }
            let top = top_face(&sup).ok_or(OpError::NoFreePosition)?;
            let region = PlacementRegion::OnTop { top };
            let z = top.max.z;
            let (x, y) = find_position_where(&w.state, fp, &region, &mut rng, &[], |x, y| probe(&w.state, x, y, z))
                .map_err(|_| OpError::NoFreePosition)?;
            w.slot("anchor", sup.label.clone());
            (x, y, z, Some(*anchor), Qualifier::OnTopOf(sup.label.clone()))
        }
        AddPlacement::NearObject { anchor } => {
            let a = anchor_of(&w.state, *anchor)?.clone();
            if a.supported_by.is_some() {
                return Err(OpError::InvalidParams(format!("{} is not on the floor", a.label)));
            }
            let region = PlacementRegion::Near {
                anchor: a.aabb(),
                min_gap: w.state.limits.near_gap_min,
                max_gap: w.state.limits.near_gap_max,
            };
            let (x, y) = find_position_where(&w.state, fp, &region, &mut rng, &[], |x, y| probe(&w.state, x, y, 0.0))
                .map_err(|_| OpError::NoFreePosition)?;
            w.slot("anchor", a.label.clone());
            (x, y, 0.0, None, Qualifier::Near(a.label.clone()))
        }
        AddPlacement::AtCoordinate { position } => {
            let (x, y) = (snap(position.x), snap(position.y));
            let bb = Aabb::from_footprint(x, y, 0.0, fp.hx, fp.hy, fp.height);
            if !is_free(&w.state, &bb, &[]) || !probe(&w.state, x, y, 0.0) {
                return Err(OpError::NoFreePosition);
            }
            let src = source_label(&w.state, *position);
            let q = match &src {
                Some(s) => Qualifier::WhereOriginally(s.clone()),
                None => Qualifier::WhereOriginally(String::new()),
            };
            if let Some(s) = src {
                w.slot("source", s);
            }
            (x, y, 0.0, None, q)
        }
    };
    w.state.next_id += 1;
    w.touch(id);
    w.state.objects.insert(id, SceneObject::from_entry(id, entry, Vec3::new(x, y, z), yaw));
    if let Some(s) = supporter {
        w.attach(id, s);
    }
    w.created = Some(id);
    w.slot("label", label);
    w.trace = Some(EditTrace { subject: id, action: RefAction::Added, qualifier: Some(qualifier) });
    Ok(())
}

fn remove(w: &mut Work, target: ObjectId) -> Result<(), OpError> {
    let obj = existing(&w.state, target)?.clone();
    if !obj.supporter_of.is_empty() {
        return Err(OpError::TargetIsSupporter);
    }
    w.detach(target);
    w.touch(target);
    w.prior_positions.insert(target, obj.position);
    w.state.objects.remove(&target);
    w.slot("target", obj.label);
    Ok(())
}

/// Camera-relative horizontal displacement of `step` metres.
pub fn direction_offset(state: &SceneState, dir: Direction, step: f64) -> Vec3 {
    let (right, fwd) = (state.camera.right(), state.camera.ground_forward());
    match dir {
        Direction::Left => -right * step,
        Direction::Right => right * step,
        Direction::Forward => fwd * step,
        Direction::Backward => -fwd * step,
    }
}

fn translate(w: &mut Work, op: &EditOp, target: ObjectId, mode: &TranslateMode) -> Result<(), OpError> {
    let obj = existing(&w.state, target)?.clone();
    if !obj.supporter_of.is_empty() {
        return Err(OpError::TargetIsSupporter);
    }
    let (hx, hy) = obj.half_extents();
    let fp = Footprint { hx, hy, height: obj.height() };
    let mut rng = op_rng(&w.state, &op.params);
    let mut moved = obj.clone();
    let check = |state: &SceneState, o: &SceneObject| pose_ok(state, o) && visible(&with_object(state, o.clone()));
    let qualifier = match mode {
        TranslateMode::ByDirection { direction } => {
            let d = direction_offset(&w.state, *direction, w.state.limits.move_step);
            moved.position = Vec3::new(snap(obj.position.x + d.x), snap(obj.position.y + d.y), obj.position.z);
            if !check(&w.state, &moved) {
                return Err(OpError::NoFreePosition);
            }
            Qualifier::Direction(*direction)
        }
        TranslateMode::NearObject { anchor } | TranslateMode::OntoObject { anchor } => {
            if *anchor == target {
                return Err(OpError::InvalidParams("anchor equals target".into()));
            }
            let a = anchor_of(&w.state, *anchor)?.clone();
            let onto = matches!(mode, TranslateMode::OntoObject { .. });
            let region = if onto {
                if !a.is_supporter {
                    return Err(OpError::InvalidParams(format!("{} is not a supporter", a.label)));
                }
                if obj.supported_by == Some(*anchor) {
                    return Err(OpError::InvalidParams(format!("already on the {}", a.label)));
                }
                PlacementRegion::OnTop { top: top_face(&a).ok_or(OpError::NoFreePosition)? }
            } else {
                if a.supported_by.is_some() {
                    return Err(OpError::InvalidParams(format!("{} is not on the floor", a.label)));
                }
                PlacementRegion::Near {
                    anchor: a.aabb(),
                    min_gap: w.state.limits.near_gap_min,
                    max_gap: w.state.limits.near_gap_max,
                }
            };
            let z = region.base_z();
            {
                let mut base = w.state.clone();
                base.objects.remove(&target);
                let probe = |x: f64, y: f64| {
                    let mut o = obj.clone();
                    o.position = Vec3::new(x, y, z);
                    visible(&with_object(&base, o))
                };
                let (x, y) = find_position_where(&w.state, fp, &region, &mut rng, &[target], probe)
                    .map_err(|_| OpError::NoFreePosition)?;
                moved.position = Vec3::new(x, y, z);
            }
            w.slot("anchor", a.label.clone());
            if onto {
                Qualifier::Onto(a.label.clone())
            } else {
                Qualifier::Near(a.label.clone())
            }
        }
        TranslateMode::AtCoordinate { position } => {
            moved.position = Vec3::new(snap(position.x), snap(position.y), 0.0);
            moved.supported_by = None;
            let mut base = w.state.clone();
            base.objects.remove(&target);
            if !is_free(&base, &moved.aabb(), &[]) || !visible(&with_object(&base, moved.clone())) {
                return Err(OpError::NoFreePosition);
            }
            let src = source_label(&w.state, *position).unwrap_or_default();
            if !src.is_empty() {
                w.slot("source", src.clone());
            }
            Qualifier::ToWhereOriginally(src)
        }
    };
    if moved.position.x == obj.position.x && moved.position.y == obj.position.y {
        return Err(OpError::InvalidParams("the move keeps the object in place".into()));
    }
    w.prior_positions.insert(target, obj.position);
    let stays = matches!(mode, TranslateMode::ByDirection { .. });
    if !stays {
        w.detach(target);
    }
    w.obj(target).position = moved.position;
    if let TranslateMode::OntoObject { anchor } = mode {
        w.attach(target, *anchor);
    }
    w.slot("target", obj.label);
    w.trace = Some(EditTrace { subject: target, action: RefAction::Moved, qualifier: Some(qualifier) });
    Ok(())
}

fn rotate(w: &mut Work, target: ObjectId, degrees: u32, direction: RotationDirection) -> Result<(), OpError> {
    if !ROTATION_DEGREES.contains(&degrees) {
        return Err(OpError::InvalidParams(format!("rotation of {degrees} degrees")));
    }
    let obj = existing(&w.state, target)?.clone();
    if !obj.supporter_of.is_empty() {
        return Err(OpError::TargetIsSupporter);
    }
    let delta = match direction {
        RotationDirection::Ccw => degrees as f64,
        RotationDirection::Cw => -(degrees as f64),
    };
    let mut turned = obj.clone();
    turned.yaw = snap((obj.yaw + delta).rem_euclid(360.0));
    if !pose_ok(&w.state, &turned) {
        return Err(OpError::CollisionAfterRotation);
    }
    if !visible(&with_object(&w.state, turned.clone())) {
        return Err(OpError::VisibilityBroken);
    }
    w.obj(target).yaw = turned.yaw;
    w.slot("target", obj.label);
    let dir = if degrees == 180 { None } else { Some(direction) };
    w.trace = Some(EditTrace {
        subject: target,
        action: RefAction::Rotated,
        qualifier: Some(Qualifier::Rotation { degrees, direction: dir }),
    });
    Ok(())
}

/// Lattice offsets (2 cm pitch) within `radius`, nearest first.
pub fn spiral_offsets(radius: f64) -> Vec<(f64, f64)> {
    let n = (radius / 0.02).floor() as i64;
    let mut cells: Vec<(i64, i64)> = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            if ((i * i + j * j) as f64).sqrt() * 0.02 <= radius + 1e-12 {
                cells.push((i, j));
            }
        }
    }
    cells.sort_by(|a, b| {
        let da = a.0 * a.0 + a.1 * a.1;
        let db = b.0 * b.0 + b.1 * b.1;
        da.cmp(&db).then_with(|| {
            let ta = atan2_deg(a.1 as f64, a.0 as f64);
            let tb = atan2_deg(b.1 as f64, b.0 as f64);
            ta.total_cmp(&tb)
        })
    });
    cells.into_iter().map(|(i, j)| (0.02 * i as f64, 0.02 * j as f64)).collect()
}

fn replace(w: &mut Work, target: ObjectId, new_label: &str, catalog: &AssetCatalog) -> Result<(), OpError> {
    let old = existing(&w.state, target)?.clone();
    if !old.supporter_of.is_empty() {
        return Err(OpError::TargetIsSupporter);
    }
    let entry = catalog.get(new_label).ok_or_else(|| OpError::UnknownLabel(new_label.to_string()))?;
    if w.state.find_label(new_label).is_some() {
        return Err(OpError::LabelNotNovel(new_label.to_string()));
    }
    let id = ObjectId(w.state.next_id);
    let mut base = w.state.clone();
    base.objects.remove(&target);
    if let Some(s) = old.supported_by {
        if let Some(sup) = base.objects.get_mut(&s) {
            sup.supporter_of.remove(&target);
        }
    }
    let mut fresh = SceneObject::from_entry(id, entry, old.position, old.yaw);
    fresh.supported_by = old.supported_by;
    let mut found = None;
    for (dx, dy) in spiral_offsets(w.state.limits.replace_search_radius) {
        let mut cand = fresh.clone();
        cand.position = Vec3::new(snap(old.position.x + dx), snap(old.position.y + dy), old.position.z);
        if pose_ok(&base, &cand) && visible(&with_object(&base, cand.clone())) {
            found = Some(cand);
            break;
        }
    }
    let new_obj = found.ok_or(OpError::NoFreePosition)?;
    w.detach(target);
    w.touch(target);
    w.prior_positions.insert(target, old.position);
    w.state.objects.remove(&target);
    w.state.next_id += 1;
    w.touch(id);
    w.state.objects.insert(id, SceneObject { supported_by: None, ..new_obj.clone() });
    if let Some(s) = new_obj.supported_by {
        w.attach(id, s);
    }
    w.created = Some(id);
    w.slot("target", old.label.clone());
    w.slot("new_label", new_label);
    w.trace = Some(EditTrace { subject: id, action: RefAction::Replaced, qualifier: Some(Qualifier::InExchangeFor(old.label)) });
    Ok(())
}

fn recolor(w: &mut Work, target: ObjectId, color: ColorName) -> Result<(), OpError> {
    let obj = existing(&w.state, target)?;
    if obj.color == color {
        return Err(OpError::SameColor);
    }
    let label = obj.label.clone();
    w.obj(target).color = color;
    w.slot("target", label);
    w.trace = Some(EditTrace { subject: target, action: RefAction::Recolored, qualifier: Some(Qualifier::Color(color)) });
    Ok(())
}

fn rematerial(w: &mut Work, target: ObjectId, material: MaterialName) -> Result<(), OpError> {
    let obj = existing(&w.state, target)?;
    if obj.material == material {
        return Err(OpError::SameMaterial);
    }
    let label = obj.label.clone();
    w.obj(target).material = material;
    w.slot("target", label);
    w.trace = Some(EditTrace {
        subject: target,
        action: RefAction::MaterialChanged,
        qualifier: Some(Qualifier::Material(material)),
    });
    Ok(())
}

fn resize(w: &mut Work, target: ObjectId, scale: f64) -> Result<(), OpError> {
    if !SCALE_FACTORS.contains(&scale) {
        return Err(OpError::InvalidParams(format!("scale {scale}")));
    }
    let obj = existing(&w.state, target)?.clone();
    if !obj.supporter_of.is_empty() {
        return Err(OpError::TargetIsSupporter);
    }
    let mut scaled = obj.clone();
    scaled.scale = snap(obj.scale * scale);
    if !pose_ok(&w.state, &scaled) {
        return Err(OpError::CollisionAfterScale);
    }
    if !visible(&with_object(&w.state, scaled.clone())) {
        return Err(OpError::VisibilityBroken);
    }
    w.obj(target).scale = scaled.scale;
    w.slot("target", obj.label);
    w.trace = Some(EditTrace { subject: target, action: RefAction::Resized, qualifier: Some(Qualifier::Scale(scale)) });
    Ok(())
}

fn viewpoint(w: &mut Work, motion: CameraMotion, direction: CameraDirection, magnitude: f64) -> Result<(), OpError> {
    if !motion.directions().contains(&direction) {
        return Err(OpError::InvalidParams(format!("{direction:?} is not a {motion:?} direction")));
    }
    if magnitude != motion.magnitude() {
        return Err(OpError::InvalidParams(format!("camera magnitude {magnitude}")));
    }
    let mut cam = w.state.camera.clone();
    let sign = match direction {
        CameraDirection::Forward | CameraDirection::Right | CameraDirection::Up => 1.0,
        _ => -1.0,
    };
    match motion {
        CameraMotion::Translate => cam.position = (cam.position + cam.ground_forward() * (sign * magnitude)).snapped(),
        CameraMotion::Pan => cam.position = (cam.position + cam.right() * (sign * magnitude)).snapped(),
        CameraMotion::Tilt => cam.pitch = snap(cam.pitch + sign * magnitude),
        // Turning left is counter-clockwise seen from above.
        CameraMotion::Yaw => cam.yaw = snap((cam.yaw - sign * magnitude).rem_euclid(360.0)),
    }
    let inner = w.state.room.bounds();
    let margin = 0.1;
    let inside = cam.position.x > inner.min.x + margin
        && cam.position.x < inner.max.x - margin
        && cam.position.y > inner.min.y + margin
        && cam.position.y < inner.max.y - margin
        && cam.position.z > margin
        && cam.position.z < inner.max.z - margin;
    if !inside || !(-85.0..=30.0).contains(&cam.pitch) {
        return Err(OpError::VisibilityBroken);
    }
    if !all_visible(&w.state, &cam) {
        return Err(OpError::VisibilityBroken);
    }
    w.snapshot.camera = Some(w.state.camera.clone());
    w.state.camera = cam;
    Ok(())
}

fn background(w: &mut Work, scope: BackgroundScope, texture: crate::catalog::TextureId) -> Result<(), OpError> {
    let room = &w.state.room;
    let same = match scope {
        BackgroundScope::FloorOnly => room.floor_texture == texture,
        BackgroundScope::FloorAndWalls => room.floor_texture == texture || room.wall_texture == texture,
    };
    if same {
        return Err(OpError::SameTexture);
    }
    w.snapshot.room = Some(w.state.room.clone());
    w.state.room.floor_texture = texture;
    if scope == BackgroundScope::FloorAndWalls {
        w.state.room.wall_texture = texture;
    }
    Ok(())
}
