//! Deterministic software rasterizer.
//!
//! Scenes are reduced to convex polyhedral pieces, back-face culled,
//! clipped against a near plane and projected to 8-bit subpixel fixed point.
//! Pieces are drawn back to front in an order derived from axis-aligned
//! separating planes, which is exact for disjoint convex pieces. Shading is
//! flat: a per-normal light factor times the object color and a material
//! modifier, all in integer arithmetic once the geometry is projected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

use crate::catalog::{MaterialName, ShapeKind, TexturePattern, TextureId};
use crate::fmath::{sin_cos_deg, tan_deg};
use crate::geometry::{rotate_xy, Aabb, Vec3};
use crate::scene::{Camera, ObjectId, Room, SceneObject, SceneState};

const SUBPIXEL_BITS: u32 = 8;
const ONE: i64 = 1 << SUBPIXEL_BITS;
const NEAR: f64 = 0.05;
/// Owner value for structural planes and empty samples.
pub const NO_OWNER: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub resolution: u32,
    pub supersampling: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { resolution: 256, supersampling: 2 }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RenderError {
    #[error("object {0} is not in the scene")]
    TargetMissing(ObjectId),
    #[error("resolution must be a power of two, got {0}")]
    BadResolution(u32),
    #[error("png: {0}")]
    Png(String),
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.resolution == 0 || !self.resolution.is_power_of_two() {
            return Err(RenderError::BadResolution(self.resolution));
        }
        if !(self.supersampling == 1 || self.supersampling == 2) {
            return Err(RenderError::BadResolution(self.supersampling));
        }
        Ok(())
    }
}

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32) -> Image {
        Image { width, height, pixels: vec![0; (width * height * 3) as usize] }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_compression(png::Compression::Balanced);
            enc.set_filter(png::Filter::Sub);
            let mut w = enc.write_header().expect("in-memory png header");
            w.write_image_data(&self.pixels).expect("in-memory png data");
        }
        out
    }

    pub fn from_png(bytes: &[u8]) -> Result<Image, RenderError> {
        let dec = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut reader = dec.read_info().map_err(|e| RenderError::Png(e.to_string()))?;
        let size = reader.output_buffer_size().ok_or_else(|| RenderError::Png("image too large".into()))?;
        let mut buf = vec![0; size];
        let info = reader.next_frame(&mut buf).map_err(|e| RenderError::Png(e.to_string()))?;
        if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
            return Err(RenderError::Png("expected 8-bit RGB".into()));
        }
        buf.truncate(info.buffer_size());
        Ok(Image { width: info.width, height: info.height, pixels: buf })
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

// ---------------------------------------------------------------- geometry

struct Face {
    verts: Vec<Vec3>,
    normal: Vec3,
    rgb: [u8; 3],
}

/// A convex solid (or, for the room, a set of non-overlapping inward faces).
struct Piece {
    owner: u32,
    material: Option<MaterialName>,
    bounds: Aabb,
    faces: Vec<Face>,
}

fn shade(normal: Vec3) -> u32 {
    // Fixed light direction; factor in 1/256 units.
    let l = Vec3::new(0.35, 0.55, 0.76);
    let ln = l * (1.0 / l.length());
    let d = normal.dot(ln).max(0.0);
    (140.0 + 116.0 * d) as u32
}

fn tint(rgb: [u8; 3], factor: u32) -> [u8; 3] {
    rgb.map(|c| ((c as u32 * factor + 128) >> 8).min(255) as u8)
}

fn material_tint(rgb: [u8; 3], m: MaterialName) -> [u8; 3] {
    let [r, g, b] = rgb.map(u32::from);
    // (multiplier, per-channel warm/cool skew), in 1/256 units.
    let (k, sr, sg, sb) = match m {
        MaterialName::Wood => (230, 268, 250, 220),
        MaterialName::Metal => (205, 240, 252, 280),
        MaterialName::Plastic => (256, 256, 256, 256),
        MaterialName::Fabric => (218, 256, 256, 256),
        MaterialName::Glass => (154, 250, 256, 270),
    };
    let f = |c: u32, s: u32| ((c * k / 256 * s + 128) >> 8).min(255) as u8;
    [f(r, sr), f(g, sg), f(b, sb)]
}

fn polygon_normal(v: &[Vec3]) -> Vec3 {
    let n = (v[1] - v[0]).cross(v[2] - v[0]);
    let len = n.length();
    if len > 0.0 {
        n * (1.0 / len)
    } else {
        n
    }
}

fn face(verts: Vec<Vec3>, rgb: [u8; 3]) -> Face {
    let normal = polygon_normal(&verts);
    Face { verts, normal, rgb }
}

/// Convex prism over a CCW base polygon (local xy, yaw applied), z in [z0, z1].
fn prism(base: &[(f64, f64)], z0: f64, z1: f64, color: [u8; 3]) -> Vec<Face> {
    let n = base.len();
    let mut faces = Vec::with_capacity(n + 2);
    let top: Vec<Vec3> = base.iter().map(|&(x, y)| Vec3::new(x, y, z1)).collect();
    let bottom: Vec<Vec3> = base.iter().rev().map(|&(x, y)| Vec3::new(x, y, z0)).collect();
    for i in 0..n {
        let (a, b) = (base[i], base[(i + 1) % n]);
        let quad = vec![
            Vec3::new(a.0, a.1, z0),
            Vec3::new(b.0, b.1, z0),
            Vec3::new(b.0, b.1, z1),
            Vec3::new(a.0, a.1, z1),
        ];
        let f = face(quad, color);
        let s = shade(f.normal);
        faces.push(Face { rgb: tint(color, s), ..f });
    }
    for verts in [top, bottom] {
        let f = face(verts, color);
        let s = shade(f.normal);
        faces.push(Face { rgb: tint(color, s), ..f });
    }
    faces
}

fn rect(cx: f64, cy: f64, hx: f64, hy: f64, yaw: f64, ox: f64, oy: f64) -> Vec<(f64, f64)> {
    [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]
        .iter()
        .map(|&(x, y)| {
            let (rx, ry) = rotate_xy(cx + x, cy + y, yaw);
            (ox + rx, oy + ry)
        })
        .collect()
}

fn pieces_for(obj: &SceneObject) -> Vec<Piece> {
    let size = obj.size();
    let p = obj.position;
    let color = material_tint(obj.color.rgb(), obj.material);
    let owner = obj.id.0;
    let mk = |faces: Vec<Face>| {
        let mut bb: Option<Aabb> = None;
        for f in &faces {
            for v in &f.verts {
                let b = Aabb::new(*v, *v);
                bb = Some(bb.map_or(b, |x| x.union(&b)));
            }
        }
        Piece { owner, material: Some(obj.material), bounds: bb.expect("non-empty piece"), faces }
    };
    match obj.shape {
        ShapeKind::Box => {
            let base = rect(0.0, 0.0, size.x / 2.0, size.y / 2.0, obj.yaw, p.x, p.y);
            vec![mk(prism(&base, p.z, p.z + size.z, color))]
        }
        ShapeKind::Cylinder => {
            let base: Vec<(f64, f64)> = (0..12)
                .map(|k| {
                    let (s, c) = sin_cos_deg(30.0 * k as f64 + obj.yaw);
                    (p.x + c * size.x / 2.0, p.y + s * size.y / 2.0)
                })
                .collect();
            vec![mk(prism(&base, p.z, p.z + size.z, color))]
        }
        ShapeKind::Sphere => vec![mk(sphere_faces(p, size, obj.yaw, color))],
        ShapeKind::Composite => {
            let slab = (size.z * 0.12).max(0.03);
            let leg = (size.x.min(size.y) * 0.12).max(0.03);
            let leg_top = p.z + size.z - slab;
            let mut out = vec![mk(prism(
                &rect(0.0, 0.0, size.x / 2.0, size.y / 2.0, obj.yaw, p.x, p.y),
                leg_top,
                p.z + size.z,
                color,
            ))];
            let (lx, ly) = (size.x / 2.0 - leg / 2.0, size.y / 2.0 - leg / 2.0);
            for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                let base = rect(sx * lx, sy * ly, leg / 2.0, leg / 2.0, obj.yaw, p.x, p.y);
                out.push(mk(prism(&base, p.z, leg_top, color)));
            }
            out
        }
    }
}

fn sphere_faces(p: Vec3, size: Vec3, yaw: f64, color: [u8; 3]) -> Vec<Face> {
    const LAT: usize = 6;
    const LON: usize = 12;
    let (rx, ry, rz) = (size.x / 2.0, size.y / 2.0, size.z / 2.0);
    let centre = Vec3::new(p.x, p.y, p.z + rz);
    let point = |i: usize, j: usize| {
        // i = 0 is the south pole, i = LAT the north pole.
        let (sl, cl) = sin_cos_deg(-90.0 + 180.0 * i as f64 / LAT as f64);
        let (sa, ca) = sin_cos_deg(yaw + 360.0 * j as f64 / LON as f64);
        centre + Vec3::new(rx * cl * ca, ry * cl * sa, rz * sl)
    };
    let mut faces = Vec::new();
    for i in 0..LAT {
        for j in 0..LON {
            let j1 = (j + 1) % LON;
            let verts = if i == 0 {
                vec![point(0, 0), point(1, j1), point(1, j)]
            } else if i == LAT - 1 {
                vec![point(i, j), point(i, j1), point(LAT, 0)]
            } else {
                vec![point(i, j), point(i, j1), point(i + 1, j1), point(i + 1, j)]
            };
            let f = face(verts, color);
            let s = shade(f.normal);
            faces.push(Face { rgb: tint(color, s), ..f });
        }
    }
    faces
}

fn texture_color(t: TextureId, u: f64, v: f64) -> [u8; 3] {
    match t.pattern() {
        TexturePattern::Flat => t.base_rgb(),
        TexturePattern::Checker { second, cell } => {
            let a = (u / cell).floor() as i64 + (v / cell).floor() as i64;
            if a.rem_euclid(2) == 0 {
                t.base_rgb()
            } else {
                second
            }
        }
        TexturePattern::Stripes { second, width } => {
            if ((v / width).floor() as i64).rem_euclid(2) == 0 {
                t.base_rgb()
            } else {
                second
            }
        }
    }
}

/// Cell size used to split a plane so each cell has one pattern color.
fn texture_step(t: TextureId) -> f64 {
    match t.pattern() {
        TexturePattern::Flat => 8.0,
        TexturePattern::Checker { cell, .. } => cell,
        TexturePattern::Stripes { width, .. } => width,
    }
}

/// Splits the rectangle `origin + s*U + t*V` (s in [0, su], t in [0, sv]) into
/// pattern cells. `U x V` must point into the room.
fn plane_faces(
    origin: Vec3,
    u: Vec3,
    v: Vec3,
    su: f64,
    sv: f64,
    texture: TextureId,
    factor: u32,
    stripes_only_v: bool,
) -> Vec<Face> {
    let step = texture_step(texture);
    let cells = |len: f64| ((len / step).ceil() as usize).max(1);
    let (nu, nv) = (if stripes_only_v { 1 } else { cells(su) }, cells(sv));
    let mut faces = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let s0 = if stripes_only_v { 0.0 } else { step * i as f64 };
            let s1 = if stripes_only_v { su } else { (step * (i + 1) as f64).min(su) };
            let t0 = step * j as f64;
            let t1 = (step * (j + 1) as f64).min(sv);
            let rgb = texture_color(texture, (s0 + s1) / 2.0, (t0 + t1) / 2.0);
            let verts = vec![
                origin + u * s0 + v * t0,
                origin + u * s1 + v * t0,
                origin + u * s1 + v * t1,
                origin + u * s0 + v * t1,
            ];
            faces.push(face(verts, tint(rgb, factor)));
        }
    }
    faces
}

fn room_piece(room: &Room) -> Piece {
    let b = room.bounds();
    let (w, d, h) = (room.width, room.depth, room.height);
    let x = Vec3::new(1.0, 0.0, 0.0);
    let y = Vec3::new(0.0, 1.0, 0.0);
    let z = Vec3::new(0.0, 0.0, 1.0);
    let striped = |t: TextureId| matches!(t.pattern(), TexturePattern::Stripes { .. } | TexturePattern::Flat);
    let mut faces = plane_faces(b.min, x, y, w, d, room.floor_texture, 256, striped(room.floor_texture));
    let wt = room.wall_texture;
    let ws = striped(wt);
    // Each wall: origin at a bottom corner, U along the wall, V up; U x V points inward.
    faces.extend(plane_faces(Vec3::new(b.max.x, b.min.y, 0.0), -x, z, w, h, wt, 236, ws));
    faces.extend(plane_faces(Vec3::new(b.min.x, b.max.y, 0.0), x, z, w, h, wt, 220, ws));
    faces.extend(plane_faces(Vec3::new(b.min.x, b.min.y, 0.0), y, z, d, h, wt, 228, ws));
    faces.extend(plane_faces(Vec3::new(b.max.x, b.max.y, 0.0), -y, z, d, h, wt, 212, ws));
    let ceiling = vec![
        Vec3::new(b.min.x, b.min.y, h),
        Vec3::new(b.min.x, b.max.y, h),
        Vec3::new(b.max.x, b.max.y, h),
        Vec3::new(b.max.x, b.min.y, h),
    ];
    faces.push(face(ceiling, [246, 246, 242]));
    Piece { owner: NO_OWNER, material: None, bounds: b, faces }
}

// ---------------------------------------------------------------- raster

struct View {
    eye: Vec3,
    right: Vec3,
    up: Vec3,
    fwd: Vec3,
    focal: f64,
    size: u32,
}

impl View {
    fn new(camera: &Camera, size: u32) -> View {
        View {
            eye: camera.position,
            right: camera.right(),
            up: camera.up(),
            fwd: camera.forward(),
            focal: (size as f64 / 2.0) / tan_deg(camera.fov / 2.0),
            size,
        }
    }

    fn to_view(&self, p: Vec3) -> Vec3 {
        let d = p - self.eye;
        Vec3::new(d.dot(self.right), d.dot(self.up), d.dot(self.fwd))
    }

    /// Fixed-point screen position of a view-space point with z >= NEAR.
    fn project(&self, v: Vec3) -> (i64, i64) {
        let half = self.size as f64 / 2.0;
        let sx = half + self.focal * v.x / v.z;
        let sy = half - self.focal * v.y / v.z;
        ((sx * ONE as f64).round() as i64, (sy * ONE as f64).round() as i64)
    }
}

fn clip_near(poly: &[Vec3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ina, inb) = (a.z >= NEAR, b.z >= NEAR);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let t = (NEAR - a.z) / (b.z - a.z);
            out.push(Vec3::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, NEAR));
        }
    }
    out
}

/// A projected, front-facing convex polygon ready for scan conversion.
struct ScreenPoly {
    pts: Vec<(i64, i64)>,
    rgb: [u8; 3],
    /// View-space plane `n . p = d`, used by the depth-buffer reference.
    plane: (Vec3, f64),
}

fn project_face(view: &View, f: &Face) -> Option<ScreenPoly> {
    // Back-face test in world space.
    if f.normal.dot(view.eye - f.verts[0]) <= 0.0 {
        return None;
    }
    let vs: Vec<Vec3> = f.verts.iter().map(|&p| view.to_view(p)).collect();
    let clipped = clip_near(&vs);
    if clipped.len() < 3 {
        return None;
    }
    let mut pts: Vec<(i64, i64)> = clipped.iter().map(|&v| view.project(v)).collect();
    pts.dedup();
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() < 3 {
        return None;
    }
    let area = signed_area(&pts);
    if area == 0 {
        return None;
    }
    if area < 0 {
        pts.reverse();
    }
    let n = Vec3::new(f.normal.dot(view.right), f.normal.dot(view.up), f.normal.dot(view.fwd));
    let d = n.dot(vs[0]);
    Some(ScreenPoly { pts, rgb: f.rgb, plane: (n, d) })
}

fn signed_area(pts: &[(i64, i64)]) -> i128 {
    let mut a: i128 = 0;
    for i in 0..pts.len() {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % pts.len()];
        a += x0 as i128 * y1 as i128 - x1 as i128 * y0 as i128;
    }
    a
}

/// Calls `emit(x, y)` for every sample centre covered by the polygon, using
/// a top-left tie rule so shared edges are owned by exactly one polygon.
fn scan(poly: &ScreenPoly, size: u32, mut emit: impl FnMut(u32, u32)) {
    let pts = &poly.pts;
    let (mut minx, mut miny, mut maxx, mut maxy) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for &(x, y) in pts {
        minx = minx.min(x);
        miny = miny.min(y);
        maxx = maxx.max(x);
        maxy = maxy.max(y);
    }
    let lim = size as i64 - 1;
    let px0 = ((minx - ONE / 2).div_euclid(ONE)).clamp(0, lim);
    let px1 = ((maxx - ONE / 2).div_euclid(ONE) + 1).clamp(0, lim);
    let py0 = ((miny - ONE / 2).div_euclid(ONE)).clamp(0, lim);
    let py1 = ((maxy - ONE / 2).div_euclid(ONE) + 1).clamp(0, lim);
    if minx > (lim + 1) * ONE || maxx < 0 || miny > (lim + 1) * ONE || maxy < 0 {
        return;
    }
    // Edge functions E(p) = (b - a) x (p - a) evaluated incrementally.
    struct Edge {
        dx: i128,
        dy: i128,
        bias: i128,
        row: i128,
    }
    let sx0 = (px0 * ONE + ONE / 2) as i128;
    let sy0 = (py0 * ONE + ONE / 2) as i128;
    let mut edges: Vec<Edge> = (0..pts.len())
        .map(|i| {
            let (ax, ay) = pts[i];
            let (bx, by) = pts[(i + 1) % pts.len()];
            let (dx, dy) = ((bx - ax) as i128, (by - ay) as i128);
            let top_left = dy < 0 || (dy == 0 && dx > 0);
            let e0 = dx * (sy0 - ay as i128) - dy * (sx0 - ax as i128);
            Edge { dx, dy, bias: if top_left { 0 } else { -1 }, row: e0 }
        })
        .collect();
    for py in py0..=py1 {
        let mut vals: Vec<i128> = edges.iter().map(|e| e.row).collect();
        for px in px0..=px1 {
            if edges.iter().zip(&vals).all(|(e, v)| v + e.bias >= 0) {
                emit(px as u32, py as u32);
            }
            for (e, v) in edges.iter().zip(vals.iter_mut()) {
                *v -= e.dy * ONE as i128;
            }
        }
        for e in edges.iter_mut() {
            e.row += e.dx * ONE as i128;
        }
    }
}

struct ProjectedPiece {
    owner: u32,
    material: Option<MaterialName>,
    bounds: Aabb,
    polys: Vec<ScreenPoly>,
    rect: (i64, i64, i64, i64),
    depth: f64,
}

fn project_pieces(view: &View, pieces: Vec<Piece>) -> Vec<ProjectedPiece> {
    pieces
        .into_iter()
        .filter_map(|p| {
            let polys: Vec<ScreenPoly> = p.faces.iter().filter_map(|f| project_face(view, f)).collect();
            if polys.is_empty() {
                return None;
            }
            let mut rect = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
            for poly in &polys {
                for &(x, y) in &poly.pts {
                    rect = (rect.0.min(x), rect.1.min(y), rect.2.max(x), rect.3.max(y));
                }
            }
            let depth = view.to_view(p.bounds.center()).z;
            Some(ProjectedPiece { owner: p.owner, material: p.material, bounds: p.bounds, polys, rect, depth })
        })
        .collect()
}

/// `Some(true)` if `a` must be drawn before `b`, `Some(false)` for the
/// reverse, `None` if they cannot overlap on screen from `eye`.
fn draw_before(a: &ProjectedPiece, b: &ProjectedPiece, eye: Vec3) -> Option<bool> {
    let (ra, rb) = (a.rect, b.rect);
    if ra.2 < rb.0 || rb.2 < ra.0 || ra.3 < rb.1 || rb.3 < ra.1 {
        return None;
    }
    let get = |v: Vec3, k: usize| [v.x, v.y, v.z][k];
    let mut separable = false;
    for k in 0..3 {
        let c = get(eye, k);
        if get(a.bounds.max, k) <= get(b.bounds.min, k) {
            separable = true;
            let (lo, hi) = (get(a.bounds.max, k), get(b.bounds.min, k));
            if c >= hi {
                return Some(true);
            }
            if c <= lo {
                return Some(false);
            }
        }
        if get(b.bounds.max, k) <= get(a.bounds.min, k) {
            separable = true;
            let (lo, hi) = (get(b.bounds.max, k), get(a.bounds.min, k));
            if c >= hi {
                return Some(false);
            }
            if c <= lo {
                return Some(true);
            }
        }
    }
    if separable {
        None
    } else {
        Some(a.depth >= b.depth)
    }
}

/// Back-to-front order: topological sort of the occlusion constraints,
/// breaking cycles by drawing the farthest remaining piece.
fn painter_order(pieces: &[ProjectedPiece], eye: Vec3) -> Vec<usize> {
    let n = pieces.len();
    let mut after: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            match draw_before(&pieces[i], &pieces[j], eye) {
                Some(true) => {
                    after[i].push(j);
                    indeg[j] += 1;
                }
                Some(false) => {
                    after[j].push(i);
                    indeg[i] += 1;
                }
                None => {}
            }
        }
    }
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n).find(|&i| !done[i] && indeg[i] == 0).unwrap_or_else(|| {
            (0..n)
                .filter(|&i| !done[i])
                .max_by(|&a, &b| pieces[a].depth.total_cmp(&pieces[b].depth).then(b.cmp(&a)))
                .expect("pieces remain")
        });
        done[next] = true;
        order.push(next);
        for &j in &after[next] {
            indeg[j] = indeg[j].saturating_sub(1);
        }
    }
    order
}

fn scene_pieces(state: &SceneState) -> Vec<Piece> {
    state.objects.values().flat_map(pieces_for).collect()
}

/// Per-sample owner and color buffers at `size x size`.
struct Frame {
    size: u32,
    owner: Vec<u32>,
    color: Vec<[u8; 3]>,
}

fn rasterize(state: &SceneState, camera: &Camera, size: u32, with_room: bool, zbuffer: bool, ss: u32) -> Frame {
    let view = View::new(camera, size);
    let n = (size * size) as usize;
    let mut frame = Frame { size, owner: vec![NO_OWNER; n], color: vec![[0, 0, 0]; n] };
    if with_room {
        let room = project_pieces(&view, vec![room_piece(&state.room)]);
        for piece in &room {
            for poly in &piece.polys {
                scan(poly, size, |x, y| frame.color[(y * size + x) as usize] = poly.rgb);
            }
        }
    }
    let background = frame.color.clone();
    let pieces = project_pieces(&view, scene_pieces(state));
    let half = size as f64 / 2.0;
    let mut depth = vec![f64::INFINITY; if zbuffer { n } else { 0 }];
    let order: Vec<usize> = if zbuffer { (0..pieces.len()).collect() } else { painter_order(&pieces, view.eye) };
    for &pi in &order {
        let piece = &pieces[pi];
        for poly in &piece.polys {
            scan(poly, size, |x, y| {
                let i = (y * size + x) as usize;
                if zbuffer {
                    let (nrm, d) = poly.plane;
                    let u = (x as f64 + 0.5 - half) / view.focal;
                    let v = (half - (y as f64 + 0.5)) / view.focal;
                    let denom = nrm.x * u + nrm.y * v + nrm.z;
                    let z = if denom != 0.0 { d / denom } else { f64::INFINITY };
                    if z >= depth[i] {
                        return;
                    }
                    depth[i] = z;
                }
                frame.owner[i] = piece.owner;
                frame.color[i] = surface_color(poly.rgb, piece.material, background[i], x / ss, y / ss);
            });
        }
    }
    frame
}

fn surface_color(rgb: [u8; 3], material: Option<MaterialName>, background: [u8; 3], px: u32, py: u32) -> [u8; 3] {
    match material {
        Some(MaterialName::Glass) => {
            let mix = |c: u8, b: u8| ((c as u32 * 154 + b as u32 * 102 + 128) >> 8) as u8;
            [mix(rgb[0], background[0]), mix(rgb[1], background[1]), mix(rgb[2], background[2])]
        }
        Some(MaterialName::Metal) if (px + py) % 20 < 3 => {
            rgb.map(|c| (c as u32 + (255 - c as u32) / 2) as u8)
        }
        _ => rgb,
    }
}

// ---------------------------------------------------------------- public API

pub fn render(state: &SceneState, cfg: &RenderConfig) -> Image {
    render_with_camera(state, &state.camera, cfg)
}

pub fn render_with_camera(state: &SceneState, camera: &Camera, cfg: &RenderConfig) -> Image {
    let ss = cfg.supersampling.max(1);
    let frame = rasterize(state, camera, cfg.resolution * ss, true, false, ss);
    downsample(&frame, cfg.resolution, ss)
}

fn downsample(frame: &Frame, res: u32, ss: u32) -> Image {
    let mut img = Image::new(res, res);
    let count = ss * ss;
    for y in 0..res {
        for x in 0..res {
            let mut acc = [0u32; 3];
            for dy in 0..ss {
                for dx in 0..ss {
                    let c = frame.color[((y * ss + dy) * frame.size + x * ss + dx) as usize];
                    for k in 0..3 {
                        acc[k] += c[k] as u32;
                    }
                }
            }
            let i = ((y * res + x) * 3) as usize;
            for k in 0..3 {
                img.pixels[i + k] = ((acc[k] + count / 2) / count) as u8;
            }
        }
    }
    img
}

/// Pixels (at output resolution) where `id` is front-most in any subsample.
pub fn silhouette_mask(state: &SceneState, cfg: &RenderConfig, id: ObjectId) -> Result<Vec<bool>, RenderError> {
    if !state.objects.contains_key(&id) {
        return Err(RenderError::TargetMissing(id));
    }
    let owners = owner_buffer(state, cfg, false);
    Ok(owner_mask(&owners, cfg, Some(id)))
}

/// Pixels where no object is front-most in any subsample (when `id` is
/// `None`) or where `id` is.
pub fn owner_mask(owners: &[u32], cfg: &RenderConfig, id: Option<ObjectId>) -> Vec<bool> {
    let ss = cfg.supersampling.max(1);
    let res = cfg.resolution;
    let size = res * ss;
    let want = id.map_or(NO_OWNER, |i| i.0);
    let mut mask = vec![false; (res * res) as usize];
    for y in 0..size {
        for x in 0..size {
            if owners[(y * size + x) as usize] == want {
                mask[((y / ss) * res + x / ss) as usize] = true;
            }
        }
    }
    mask
}

/// Front-most owner per subsample, by painter's order or by depth buffer.
pub fn owner_buffer(state: &SceneState, cfg: &RenderConfig, zbuffer: bool) -> Vec<u32> {
    let ss = cfg.supersampling.max(1);
    rasterize(state, &state.camera, cfg.resolution * ss, false, zbuffer, ss).owner
}

/// Visible pixel count of each object from `camera` on a `res x res` probe.
pub fn probe_visibility(state: &SceneState, camera: &Camera, res: u32) -> BTreeMap<ObjectId, u32> {
    let frame = rasterize(state, camera, res, false, false, 1);
    let mut counts: BTreeMap<ObjectId, u32> = state.objects.keys().map(|&id| (id, 0)).collect();
    for &o in &frame.owner {
        if o != NO_OWNER {
            *counts.entry(ObjectId(o)).or_insert(0) += 1;
        }
    }
    counts
}

/// A rendered frame on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRef {
    pub chain_id: String,
    pub step_index: usize,
    pub path: String,
    pub digest: String,
}

/// Sidecar metadata written next to each PNG frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSidecar {
    pub digest: String,
    pub resolution: u32,
    pub chain_id: String,
    pub step_index: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_edges_are_covered_once() {
        // Two triangles sharing a diagonal fill a square with no double hits.
        let size = 16;
        let a = ScreenPoly {
            pts: vec![(0, 0), (16 * ONE, 0), (16 * ONE, 16 * ONE)],
            rgb: [0; 3],
            plane: (Vec3::ZERO, 0.0),
        };
        let b = ScreenPoly {
            pts: vec![(0, 0), (16 * ONE, 16 * ONE), (0, 16 * ONE)],
            rgb: [0; 3],
            plane: (Vec3::ZERO, 0.0),
        };
        let mut hits = vec![0u8; 256];
        for p in [&a, &b] {
            let mut pts = p.pts.clone();
            if signed_area(&pts) < 0 {
                pts.reverse();
            }
            let q = ScreenPoly { pts, rgb: [0; 3], plane: p.plane };
            scan(&q, size, |x, y| hits[(y * size + x) as usize] += 1);
        }
        assert!(hits.iter().all(|&h| h == 1), "{hits:?}");
    }

    #[test]
    fn png_round_trips() {
        let mut img = Image::new(4, 4);
        img.pixels.iter_mut().enumerate().for_each(|(i, p)| *p = (i * 7) as u8);
        let back = Image::from_png(&img.to_png()).unwrap();
        assert_eq!(back, img);
    }
}
