use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

use crate::fmath::{sin_cos_deg, snap};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn snapped(self) -> Vec3 {
        Vec3::new(snap(self.x), snap(self.y), snap(self.z))
    }

    pub fn xy_distance(self, o: Vec3) -> f64 {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2)).sqrt()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned box; `min <= max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    /// Box of half extents `(hx, hy)` and height `h`, centred at `(cx, cy)` with bottom at `z`.
    pub fn from_footprint(cx: f64, cy: f64, z: f64, hx: f64, hy: f64, h: f64) -> Self {
        Aabb::new(Vec3::new(cx - hx, cy - hy, z), Vec3::new(cx + hx, cy + hy, z + h))
    }

    /// Positive overlap length on each axis, 0 when separated or touching.
    fn overlaps(&self, o: &Aabb) -> (f64, f64, f64) {
        let ox = (self.max.x.min(o.max.x) - self.min.x.max(o.min.x)).max(0.0);
        let oy = (self.max.y.min(o.max.y) - self.min.y.max(o.min.y)).max(0.0);
        let oz = (self.max.z.min(o.max.z) - self.min.z.max(o.min.z)).max(0.0);
        (ox, oy, oz)
    }

    pub fn intersection_volume(&self, o: &Aabb) -> f64 {
        let (ox, oy, oz) = self.overlaps(o);
        ox * oy * oz
    }

    pub fn intersects(&self, o: &Aabb) -> bool {
        self.intersection_volume(o) > 0.0
    }

    pub fn contains(&self, o: &Aabb) -> bool {
        o.min.x >= self.min.x
            && o.min.y >= self.min.y
            && o.min.z >= self.min.z
            && o.max.x <= self.max.x
            && o.max.y <= self.max.y
            && o.max.z <= self.max.z
    }

    /// Footprint containment in the xy plane only.
    pub fn contains_xy(&self, o: &Aabb) -> bool {
        o.min.x >= self.min.x && o.min.y >= self.min.y && o.max.x <= self.max.x && o.max.y <= self.max.y
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Gap between the two footprints in the xy plane (0 if they overlap).
    pub fn xy_gap(&self, o: &Aabb) -> f64 {
        let dx = (o.min.x - self.max.x).max(self.min.x - o.max.x).max(0.0);
        let dy = (o.min.y - self.max.y).max(self.min.y - o.max.y).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb::new(
            Vec3::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y), self.min.z.min(o.min.z)),
            Vec3::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y), self.max.z.max(o.max.z)),
        )
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(b.x, b.y, b.z),
            Vec3::new(a.x, b.y, b.z),
        ]
    }
}

/// Half extents of a `w x d` rectangle rotated by `yaw` degrees about z.
pub fn rotated_half_extents(w: f64, d: f64, yaw: f64) -> (f64, f64) {
    let (s, c) = sin_cos_deg(yaw);
    let (s, c) = (s.abs(), c.abs());
    let hx = 0.5 * (c * w + s * d);
    let hy = 0.5 * (s * w + c * d);
    (hx, hy)
}

/// Rotates `(x, y)` by `yaw` degrees counter-clockwise about the origin.
pub fn rotate_xy(x: f64, y: f64, yaw: f64) -> (f64, f64) {
    let (s, c) = sin_cos_deg(yaw);
    (c * x - s * y, s * x + c * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn touching_boxes_do_not_intersect() {
        let a = Aabb::from_footprint(0.0, 0.0, 0.0, 0.5, 0.5, 1.0);
        let b = Aabb::from_footprint(1.0, 0.0, 0.0, 0.5, 0.5, 1.0);
        assert_eq!(a.intersection_volume(&b), 0.0);
        let c = Aabb::from_footprint(0.9, 0.0, 0.0, 0.5, 0.5, 1.0);
        assert!((a.intersection_volume(&c) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rotated_extents_swap_at_quarter_turn() {
        let (hx, hy) = rotated_half_extents(2.0, 1.0, 90.0);
        assert_eq!((hx, hy), (0.5, 1.0));
        let (hx, hy) = rotated_half_extents(2.0, 1.0, 0.0);
        assert_eq!((hx, hy), (1.0, 0.5));
    }

    #[test]
    fn rotated_extents_bound_rotated_corners() {
        for yaw in (0..360).step_by(15) {
            let (hx, hy) = rotated_half_extents(1.3, 0.4, yaw as f64);
            let mut mx: f64 = 0.0;
            let mut my: f64 = 0.0;
            for (sx, sy) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let (x, y) = rotate_xy(sx * 0.65, sy * 0.2, yaw as f64);
                mx = mx.max(x.abs());
                my = my.max(y.abs());
            }
            assert!((mx - hx).abs() < 1e-12 && (my - hy).abs() < 1e-12);
        }
    }

    #[test]
    fn xy_gap_between_separated_boxes() {
        let a = Aabb::from_footprint(0.0, 0.0, 0.0, 0.5, 0.5, 1.0);
        let b = Aabb::from_footprint(2.0, 0.0, 0.0, 0.5, 0.5, 1.0);
        assert!((a.xy_gap(&b) - 1.0).abs() < 1e-12);
        let c = Aabb::from_footprint(2.0, 2.0, 0.0, 0.5, 0.5, 1.0);
        assert!((a.xy_gap(&c) - 2f64.sqrt()).abs() < 1e-12);
    }
}
