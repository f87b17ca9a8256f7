//! Symbolic scene state, procedural initialization and placement geometry.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::canonical::{to_canonical_string, CanonicalError};
use crate::catalog::{
    default_material, AssetCatalog, AssetEntry, ColorName, MaterialName, ShapeKind, TextureId,
};
use crate::fmath::{atan2_deg, cos_deg, sin_cos_deg, snap};
use crate::geometry::{rotated_half_extents, Aabb, Vec3};
use crate::ops::EditOp;
use crate::rng::{Rng, SeedStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    pub floor_texture: TextureId,
    pub wall_texture: TextureId,
}

impl Room {
    /// Interior volume; the room is centred on the origin with the floor at z = 0.
    pub fn bounds(&self) -> Aabb {
        Aabb::new(
            Vec3::new(-self.width / 2.0, -self.depth / 2.0, 0.0),
            Vec3::new(self.width / 2.0, self.depth / 2.0, self.height),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    pub label: String,
    pub category: String,
    pub shape: ShapeKind,
    pub base_size: Vec3,
    pub is_supporter: bool,
    /// Footprint centre in x/y, bottom face in z.
    pub position: Vec3,
    pub yaw: f64,
    pub scale: f64,
    pub color: ColorName,
    pub material: MaterialName,
    pub supporter_of: BTreeSet<ObjectId>,
    pub supported_by: Option<ObjectId>,
}

impl SceneObject {
    pub fn from_entry(id: ObjectId, entry: &AssetEntry, position: Vec3, yaw: f64) -> SceneObject {
        SceneObject {
            id,
            label: entry.label.clone(),
            category: entry.category.clone(),
            shape: entry.shape,
            base_size: entry.base_size,
            is_supporter: entry.is_supporter,
            position,
            yaw,
            scale: 1.0,
            color: entry.default_color,
            material: default_material(&entry.category),
            supporter_of: BTreeSet::new(),
            supported_by: None,
        }
    }

    pub fn size(&self) -> Vec3 {
        self.base_size * self.scale
    }

    pub fn height(&self) -> f64 {
        self.base_size.z * self.scale
    }

    pub fn top(&self) -> f64 {
        self.position.z + self.height()
    }

    /// Half extents of the yaw-expanded footprint.
    pub fn half_extents(&self) -> (f64, f64) {
        footprint_half_extents(self.shape, self.size(), self.yaw)
    }

    pub fn aabb(&self) -> Aabb {
        let (hx, hy) = self.half_extents();
        Aabb::from_footprint(self.position.x, self.position.y, self.position.z, hx, hy, self.height())
    }
}

/// Footprint half extents of a primitive of `size` turned by `yaw`.
/// Round primitives keep their extents under rotation.
pub fn footprint_half_extents(shape: ShapeKind, size: Vec3, yaw: f64) -> (f64, f64) {
    match shape {
        ShapeKind::Cylinder | ShapeKind::Sphere => (size.x / 2.0, size.y / 2.0),
        ShapeKind::Box | ShapeKind::Composite => rotated_half_extents(size.x, size.y, yaw),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub yaw: f64,
    pub pitch: f64,
    pub fov: f64,
}

impl Camera {
    pub fn forward(&self) -> Vec3 {
        let (sy, cy) = sin_cos_deg(self.yaw);
        let (sp, cp) = sin_cos_deg(self.pitch);
        Vec3::new(cy * cp, sy * cp, sp)
    }

    pub fn right(&self) -> Vec3 {
        let (sy, cy) = sin_cos_deg(self.yaw);
        Vec3::new(sy, -cy, 0.0)
    }

    pub fn up(&self) -> Vec3 {
        self.right().cross(self.forward())
    }

    /// Horizontal unit vector the camera faces.
    pub fn ground_forward(&self) -> Vec3 {
        let (sy, cy) = sin_cos_deg(self.yaw);
        Vec3::new(cy, sy, 0.0)
    }
}

/// Registry entry for an object present at scene initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialEntry {
    pub label: String,
    pub position: Vec3,
}

/// Geometry and validity limits shared by initialization and edit operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLimits {
    pub placement_retries: u32,
    pub min_visible: u32,
    pub probe_resolution: u32,
    pub near_gap_min: f64,
    pub near_gap_max: f64,
    pub move_step: f64,
    pub replace_search_radius: f64,
    /// Largest footprint side an added object may have.
    pub safe_size: f64,
    pub max_height: f64,
}

impl Default for SceneLimits {
    fn default() -> Self {
        SceneLimits {
            placement_retries: 64,
            min_visible: 50,
            probe_resolution: 128,
            near_gap_min: 0.2,
            near_gap_max: 0.6,
            move_step: 0.6,
            replace_search_radius: 0.3,
            safe_size: 0.75,
            max_height: 1.0,
        }
    }
}

/// Prior values of everything an operation touched.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Snapshot {
    /// `None` means the object did not exist before the operation.
    pub objects: BTreeMap<ObjectId, Option<SceneObject>>,
    pub camera: Option<Camera>,
    pub room: Option<Room>,
    pub next_id: u32,
}

/// What an operation did, in terms later instructions can refer back to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditTrace {
    /// The object that carries the result (the new object for add/replace).
    pub subject: ObjectId,
    pub action: crate::text::RefAction,
    pub qualifier: Option<crate::text::Qualifier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutedOpRecord {
    pub op: EditOp,
    pub affected_ids: Vec<ObjectId>,
    pub created_id: Option<ObjectId>,
    pub prior_positions: BTreeMap<ObjectId, Vec3>,
    pub prior_attributes: Snapshot,
    /// Template slot values as they were when the op ran.
    pub slots: BTreeMap<String, String>,
    pub trace: Option<EditTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub room: Room,
    pub objects: BTreeMap<ObjectId, SceneObject>,
    pub camera: Camera,
    pub op_log: Vec<ExecutedOpRecord>,
    pub initial: BTreeMap<ObjectId, InitialEntry>,
    pub next_id: u32,
    pub rng_cursor: SeedStream,
    pub limits: SceneLimits,
}

impl SceneState {
    pub fn to_canonical(&self) -> Result<String, CanonicalError> {
        to_canonical_string(self)
    }

    /// Canonical text of the world only (no history), for comparing outcomes.
    pub fn world_canonical(&self) -> String {
        #[derive(Serialize)]
        struct World<'a> {
            room: &'a Room,
            objects: &'a BTreeMap<ObjectId, SceneObject>,
            camera: &'a Camera,
        }
        to_canonical_string(&World { room: &self.room, objects: &self.objects, camera: &self.camera })
            .expect("scene values are finite")
    }

    pub fn get(&self, id: ObjectId) -> Option<&SceneObject> {
        self.objects.get(&id)
    }

    pub fn find_label(&self, label: &str) -> Option<ObjectId> {
        self.objects.values().find(|o| o.label == label).map(|o| o.id)
    }

    /// Labels that have ever appeared in this scene's history.
    pub fn used_labels(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.initial.values().map(|e| e.label.clone()).collect();
        out.extend(self.objects.values().map(|o| o.label.clone()));
        for rec in &self.op_log {
            for prior in rec.prior_attributes.objects.values().flatten() {
                out.insert(prior.label.clone());
            }
        }
        out
    }

    /// An empty room seen from `camera`. Objects are added with
    /// [`SceneState::insert`]; handy for hand-built fixtures.
    pub fn blank(cfg: &SceneConfig, camera: Camera) -> SceneState {
        let mut limits = cfg.limits.clone();
        limits.safe_size = cfg.safe_size();
        SceneState {
            room: Room {
                width: cfg.room_width,
                depth: cfg.room_depth,
                height: cfg.room_height,
                floor_texture: TextureId::Concrete,
                wall_texture: TextureId::Plaster,
            },
            objects: BTreeMap::new(),
            camera,
            op_log: Vec::new(),
            initial: BTreeMap::new(),
            next_id: 0,
            rng_cursor: SeedStream(0),
            limits,
        }
    }

    /// Adds an object to the initial scene without any checks, optionally
    /// stacked on `on`, and settles it.
    pub fn insert(&mut self, entry: &AssetEntry, x: f64, y: f64, yaw: f64, on: Option<ObjectId>) -> ObjectId {
        let id = insert_new(self, entry, Vec3::new(x, y, 0.0), yaw);
        if let Some(s) = on {
            self.objects.get_mut(&id).expect("just inserted").supported_by = Some(s);
            if let Some(sup) = self.objects.get_mut(&s) {
                sup.supporter_of.insert(id);
            }
        }
        settle_on_floor(self, id);
        let o = &self.objects[&id];
        self.initial.insert(id, InitialEntry { label: o.label.clone(), position: o.position });
        id
    }

    pub fn floor_objects(&self) -> impl Iterator<Item = &SceneObject> {
        self.objects.values().filter(|o| o.supported_by.is_none())
    }

    /// Restores the state from before the last logged operation.
    pub fn undo_last(&mut self) -> Option<ExecutedOpRecord> {
        let rec = self.op_log.pop()?;
        let snap = &rec.prior_attributes;
        for (id, prior) in &snap.objects {
            match prior {
                Some(o) => {
                    self.objects.insert(*id, o.clone());
                }
                None => {
                    self.objects.remove(id);
                }
            }
        }
        if let Some(c) = &snap.camera {
            self.camera = c.clone();
        }
        if let Some(r) = &snap.room {
            self.room = r.clone();
        }
        self.next_id = snap.next_id;
        Some(rec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Total objects including the central supporter.
    pub max_objects: usize,
    pub room_width: f64,
    pub room_depth: f64,
    pub room_height: f64,
    /// Side of the centred square objects are placed in.
    pub placement_side: f64,
    pub fov: f64,
    pub camera_budget: u32,
    /// Footprint cap as a fraction of `sqrt(placement area / max_objects)`.
    pub safe_size_factor: f64,
    pub limits: SceneLimits,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            max_objects: 9,
            room_width: 8.0,
            room_depth: 8.0,
            room_height: 3.0,
            placement_side: 4.0,
            fov: 60.0,
            camera_budget: 256,
            safe_size_factor: 0.55,
            limits: SceneLimits::default(),
        }
    }
}

impl SceneConfig {
    pub fn safe_size(&self) -> f64 {
        let n = self.max_objects.max(1) as f64;
        snap((self.placement_side * self.placement_side / n).sqrt() * self.safe_size_factor)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SceneError {
    #[error("catalog offers {available} usable labels, {needed} needed")]
    CatalogTooSmall { available: usize, needed: usize },
    #[error("no camera pose among {0} samples sees every object")]
    CameraSearchExhausted(u32),
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
}

/// Whether an entry fits the size range objects are sampled from.
pub fn fits_safe_size(entry: &AssetEntry, limits: &SceneLimits) -> bool {
    entry.base_size.x.max(entry.base_size.y) <= limits.safe_size && entry.base_size.z <= limits.max_height
}

pub fn init_scene(cfg: &SceneConfig, catalog: &AssetCatalog, seed: SeedStream) -> Result<SceneState, SceneError> {
    if cfg.max_objects == 0 {
        return Err(SceneError::InvalidConfig("max_objects must be at least 1".into()));
    }
    let mut limits = cfg.limits.clone();
    limits.safe_size = cfg.safe_size();
    let stream = seed.child("scene", 0);

    let supporters: Vec<&AssetEntry> = catalog
        .supporters()
        .filter(|e| e.base_size.x.max(e.base_size.y) <= cfg.placement_side * 0.5)
        .collect();
    if supporters.is_empty() {
        return Err(SceneError::CatalogTooSmall { available: 0, needed: cfg.max_objects });
    }
    let mut rng = stream.child("room", 0).rng();
    let floor_texture = *TextureId::ALL.choose(&mut rng).expect("textures");
    let wall_texture = *TextureId::ALL.choose(&mut rng).expect("textures");
    let room = Room {
        width: cfg.room_width,
        depth: cfg.room_depth,
        height: cfg.room_height,
        floor_texture,
        wall_texture,
    };

    let mut pick = stream.child("supporter", 0).rng();
    let supporter = supporters[pick.random_range(0..supporters.len())];
    let others: Vec<&AssetEntry> = catalog
        .entries
        .iter()
        .filter(|e| e.label != supporter.label && fits_safe_size(e, &limits))
        .collect();
    let needed = cfg.max_objects - 1;
    if others.len() < needed {
        return Err(SceneError::CatalogTooSmall { available: others.len() + 1, needed: cfg.max_objects });
    }
    let mut batch = stream.child("batch", 0).rng();
    let mut chosen = others.clone();
    chosen.shuffle(&mut batch);
    chosen.truncate(needed);

    let mut state = SceneState {
        room,
        objects: BTreeMap::new(),
        camera: Camera { position: Vec3::new(0.0, -3.5, 2.5), yaw: 90.0, pitch: -30.0, fov: cfg.fov },
        op_log: Vec::new(),
        initial: BTreeMap::new(),
        next_id: 0,
        rng_cursor: seed,
        limits,
    };

    let supporter_yaw = if pick.random_bool(0.5) { 0.0 } else { 90.0 };
    insert_new(&mut state, supporter, Vec3::ZERO, supporter_yaw);

    let half = cfg.placement_side / 2.0;
    let region = PlacementRegion::Rect { min_x: -half, max_x: half, min_y: -half, max_y: half };
    for (i, entry) in chosen.iter().enumerate() {
        let mut rng = stream.child("place", i as u64).rng();
        let yaw = 15.0 * rng.random_range(0..24) as f64;
        let (hx, hy) = footprint_half_extents(entry.shape, entry.base_size, yaw);
        let fp = Footprint { hx, hy, height: entry.base_size.z };
        if let Ok((x, y)) = find_free_position(&state, fp, &region, &mut rng, &[]) {
            insert_new(&mut state, entry, Vec3::new(x, y, 0.0), yaw);
        }
    }

    state.camera = sample_camera(&state, cfg, stream.child("camera", 0))?;
    state.initial = state
        .objects
        .values()
        .map(|o| (o.id, InitialEntry { label: o.label.clone(), position: o.position }))
        .collect();
    Ok(state)
}

fn insert_new(state: &mut SceneState, entry: &AssetEntry, position: Vec3, yaw: f64) -> ObjectId {
    let id = ObjectId(state.next_id);
    state.next_id += 1;
    state.objects.insert(id, SceneObject::from_entry(id, entry, position.snapped(), yaw));
    id
}

fn sample_camera(state: &SceneState, cfg: &SceneConfig, stream: SeedStream) -> Result<Camera, SceneError> {
    let mut rng = stream.rng();
    let lim = cfg.room_width.min(cfg.room_depth) / 2.0 - 0.2;
    for _ in 0..cfg.camera_budget {
        let azimuth: f64 = rng.random_range(0.0..360.0);
        let radius: f64 = rng.random_range(3.6..5.2);
        let height: f64 = rng.random_range(2.2..2.8);
        let (s, c) = sin_cos_deg(azimuth);
        let x = (c * radius).clamp(-lim, lim);
        let y = (s * radius).clamp(-lim, lim);
        let dist = (x * x + y * y).sqrt();
        let yaw = atan2_deg(-y, -x) + rng.random_range(-6.0..6.0);
        let pitch = atan2_deg(0.35 - height, dist) + rng.random_range(-3.0..3.0);
        let camera = Camera {
            position: Vec3::new(x, y, height).snapped(),
            yaw: snap(yaw.rem_euclid(360.0)),
            pitch: snap(pitch),
            fov: cfg.fov,
        };
        if all_visible(state, &camera) {
            return Ok(camera);
        }
    }
    Err(SceneError::CameraSearchExhausted(cfg.camera_budget))
}

/// Visible probe-pixel count per object.
pub fn check_visibility(state: &SceneState, camera: &Camera) -> BTreeMap<ObjectId, u32> {
    crate::render::probe_visibility(state, camera, state.limits.probe_resolution)
}

pub fn all_visible(state: &SceneState, camera: &Camera) -> bool {
    let counts = check_visibility(state, camera);
    state.objects.keys().all(|id| counts.get(id).copied().unwrap_or(0) >= state.limits.min_visible)
}

/// Footprint of an object being placed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub hx: f64,
    pub hy: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlacementRegion {
    /// Centre anywhere in the rectangle, on the floor.
    Rect { min_x: f64, max_x: f64, min_y: f64, max_y: f64 },
    /// On the floor, with the footprint's gap to `anchor` in `[min_gap, max_gap]`.
    Near { anchor: Aabb, min_gap: f64, max_gap: f64 },
    /// Resting on top of a supporter, footprint inside its top face.
    OnTop { top: Aabb },
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("no collision-free position found")]
pub struct NotFound;

impl PlacementRegion {
    pub fn base_z(&self) -> f64 {
        match self {
            PlacementRegion::OnTop { top } => top.max.z,
            _ => 0.0,
        }
    }

    fn sample(&self, fp: Footprint, rng: &mut Rng) -> Option<(f64, f64)> {
        match *self {
            PlacementRegion::Rect { min_x, max_x, min_y, max_y } => {
                let (lo_x, hi_x) = (min_x + fp.hx, max_x - fp.hx);
                let (lo_y, hi_y) = (min_y + fp.hy, max_y - fp.hy);
                if lo_x > hi_x || lo_y > hi_y {
                    return None;
                }
                Some((uniform(rng, lo_x, hi_x), uniform(rng, lo_y, hi_y)))
            }
            PlacementRegion::OnTop { top } => {
                let (lo_x, hi_x) = (top.min.x + fp.hx, top.max.x - fp.hx);
                let (lo_y, hi_y) = (top.min.y + fp.hy, top.max.y - fp.hy);
                if lo_x > hi_x || lo_y > hi_y {
                    return None;
                }
                Some((uniform(rng, lo_x, hi_x), uniform(rng, lo_y, hi_y)))
            }
            PlacementRegion::Near { anchor, min_gap, max_gap } => {
                // Centres at gap g form a rounded rectangle around the
                // anchor grown by the footprint; pick a point on it uniformly.
                let g = uniform(rng, min_gap, max_gap);
                let c = anchor.center();
                let a = (anchor.max.x - anchor.min.x) / 2.0 + fp.hx;
                let b = (anchor.max.y - anchor.min.y) / 2.0 + fp.hy;
                let arc = std::f64::consts::FRAC_PI_2 * g;
                let total = 4.0 * a + 4.0 * b + 4.0 * arc;
                let mut s = uniform(rng, 0.0, total);
                // Walk: bottom edge, corner, right edge, corner, top, corner, left, corner.
                let segments = [2.0 * a, arc, 2.0 * b, arc, 2.0 * a, arc, 2.0 * b, arc];
                let mut k = 0;
                while k < 7 && s > segments[k] {
                    s -= segments[k];
                    k += 1;
                }
                let corner = |cx: f64, cy: f64, start_deg: f64, s: f64| {
                    let deg = start_deg + (s / g.max(1e-12)).to_degrees();
                    let (sn, cs) = sin_cos_deg(deg);
                    (cx + g * cs, cy + g * sn)
                };
                let (x, y) = match k {
                    0 => (c.x - a + s, c.y - b - g),
                    1 => corner(c.x + a, c.y - b, -90.0, s),
                    2 => (c.x + a + g, c.y - b + s),
                    3 => corner(c.x + a, c.y + b, 0.0, s),
                    4 => (c.x + a - s, c.y + b + g),
                    5 => corner(c.x - a, c.y + b, 90.0, s),
                    6 => (c.x - a - g, c.y + b - s),
                    _ => corner(c.x - a, c.y - b, 180.0, s),
                };
                Some((x, y))
            }
        }
    }
}

fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Whether an AABB is inside the room and overlaps no object outside `ignore`.
pub fn is_free(state: &SceneState, bb: &Aabb, ignore: &[ObjectId]) -> bool {
    if !state.room.bounds().contains(bb) {
        return false;
    }
    state.objects.values().filter(|o| !ignore.contains(&o.id)).all(|o| !o.aabb().intersects(bb))
}

/// Seeded rejection sampling inside `region`; candidates are snapped to the
/// micrometre grid before testing so the returned position is exactly valid.
pub fn find_free_position(
    state: &SceneState,
    fp: Footprint,
    region: &PlacementRegion,
    rng: &mut Rng,
    ignore: &[ObjectId],
) -> Result<(f64, f64), NotFound> {
    find_position_where(state, fp, region, rng, ignore, |_, _| true)
}

/// Like [`find_free_position`], additionally requiring `accept(x, y)`.
pub fn find_position_where(
    state: &SceneState,
    fp: Footprint,
    region: &PlacementRegion,
    rng: &mut Rng,
    ignore: &[ObjectId],
    mut accept: impl FnMut(f64, f64) -> bool,
) -> Result<(f64, f64), NotFound> {
    let z = region.base_z();
    for _ in 0..state.limits.placement_retries {
        let Some((x, y)) = region.sample(fp, rng) else { return Err(NotFound) };
        let (x, y) = (snap(x), snap(y));
        let bb = Aabb::from_footprint(x, y, z, fp.hx, fp.hy, fp.height);
        if let PlacementRegion::OnTop { top } = region {
            if !top.contains_xy(&bb) {
                continue;
            }
        }
        if is_free(state, &bb, ignore) && accept(x, y) {
            return Ok((x, y));
        }
    }
    Err(NotFound)
}

/// Drops an object onto its supporter (or the floor), then re-settles
/// everything it carries.
pub fn settle_on_floor(state: &mut SceneState, id: ObjectId) {
    let Some(obj) = state.objects.get(&id) else { return };
    let z = match obj.supported_by.and_then(|s| state.objects.get(&s)) {
        Some(s) => s.top(),
        None => 0.0,
    };
    let children: Vec<ObjectId> = obj.supporter_of.iter().copied().collect();
    if let Some(o) = state.objects.get_mut(&id) {
        o.position.z = snap(z);
    }
    for c in children {
        settle_on_floor(state, c);
    }
}

/// Horizontal unit vectors (right, forward) of the camera, used for
/// camera-relative directions.
pub fn camera_ground_axes(camera: &Camera) -> (Vec3, Vec3) {
    (camera.right(), camera.ground_forward())
}

/// Whether `cos(pitch)` leaves the camera with a usable horizon.
pub fn camera_is_sane(camera: &Camera, room: &Room) -> bool {
    room.bounds().contains(&Aabb::new(camera.position, camera.position)) && cos_deg(camera.pitch) > 0.2
}
