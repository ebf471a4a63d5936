//! Box geometry in the canonical scene frame.
//!
//! The frame is right-handed and Z-up: `x` to the right, `y` forward (away
//! from a viewer standing at negative `y`), `z` up. One unit is one meter by
//! convention. Object positions denote the *bottom center* of the object's
//! axis-aligned bounding box.
//!
//! Rotations are Euler angles in degrees, applied roll (about `x`), then
//! pitch (about `y`), then yaw (about `z`), so the full rotation matrix is
//! `Rz(yaw) * Ry(pitch) * Rx(roll)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;

/// Default clearance between two boxes below which they are reported as colliding.
pub const DEFAULT_COLLISION_BUFFER: f64 = 0.02;

/// Overlap volumes at or below this are contact, not collision.
pub const TOUCH_VOLUME_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// A point or extent in scene units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn splat(v: f64) -> Self {
        Self { x: v, y: v, z: v }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn min_component(&self) -> f64 {
        self.x.min(self.y).min(self.z)
    }

    pub fn component_min(&self, o: &Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn component_max(&self, o: &Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn get(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index {axis} out of range"),
        }
    }

    fn check_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(GeometryError::InvalidArgument(format!(
                "{what} has non-finite component: {self}"
            )))
        }
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl From<Vec3> for Vector3<f64> {
    fn from(v: Vec3) -> Self {
        Vector3::new(v.x, v.y, v.z)
    }
}

impl From<Vector3<f64>> for Vec3 {
    fn from(v: Vector3<f64>) -> Self {
        Vec3::new(v.x, v.y, v.z)
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Wraps an angle in degrees into `[-180, 180)`.
///
/// Angles already in range are returned unchanged, which keeps the mapping
/// idempotent (and serialized rotations stable across round trips).
pub fn normalize_degrees(angle: f64) -> f64 {
    if (-180.0..180.0).contains(&angle) {
        return angle;
    }
    let mut wrapped = (angle + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped >= 180.0 {
        wrapped -= 360.0;
    }
    if wrapped < -180.0 {
        wrapped += 360.0;
    }
    wrapped
}

/// `(sin, cos)` of an angle in degrees, exact at multiples of 90°.
pub fn sin_cos_deg(angle: f64) -> (f64, f64) {
    let quarter = angle / 90.0;
    if quarter == quarter.round() {
        match (quarter as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        angle.to_radians().sin_cos()
    }
}

/// Euler rotation in degrees; see the module docs for the axis order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "RawRotation", into = "RawRotation")]
pub struct EulerRotation {
    yaw: f64,
    pitch: f64,
    roll: f64,
}

#[derive(Serialize, Deserialize)]
struct RawRotation {
    yaw: f64,
    pitch: f64,
    roll: f64,
}

impl From<RawRotation> for EulerRotation {
    fn from(r: RawRotation) -> Self {
        EulerRotation::new(r.yaw, r.pitch, r.roll)
    }
}

impl From<EulerRotation> for RawRotation {
    fn from(r: EulerRotation) -> Self {
        RawRotation {
            yaw: r.yaw,
            pitch: r.pitch,
            roll: r.roll,
        }
    }
}

impl EulerRotation {
    pub const IDENTITY: EulerRotation = EulerRotation {
        yaw: 0.0,
        pitch: 0.0,
        roll: 0.0,
    };

    /// Builds a rotation, wrapping each angle into `[-180, 180)`.
    /// Non-finite angles are kept as-is and rejected by the geometry operations.
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        let norm = |a: f64| if a.is_finite() { normalize_degrees(a) } else { a };
        Self {
            yaw: norm(yaw),
            pitch: norm(pitch),
            roll: norm(roll),
        }
    }

    pub fn from_yaw(yaw: f64) -> Self {
        Self::new(yaw, 0.0, 0.0)
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn roll(&self) -> f64 {
        self.roll
    }

    pub fn is_finite(&self) -> bool {
        self.yaw.is_finite() && self.pitch.is_finite() && self.roll.is_finite()
    }

    pub fn is_identity(&self) -> bool {
        self.yaw == 0.0 && self.pitch == 0.0 && self.roll == 0.0
    }

    /// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn matrix(&self) -> Matrix3<f64> {
        let (sy, cy) = sin_cos_deg(self.yaw);
        let (sp, cp) = sin_cos_deg(self.pitch);
        let (sr, cr) = sin_cos_deg(self.roll);
        let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
        let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
        rz * ry * rx
    }

    /// Horizontal unit vector the object's front faces after rotation.
    ///
    /// At zero yaw the canonical front faces `-y` (toward the viewer).
    pub fn forward(&self) -> Vec3 {
        let (s, c) = sin_cos_deg(self.yaw);
        Vec3::new(s, -c, 0.0)
    }

    /// Horizontal unit vector to the object's own right-hand side.
    pub fn right(&self) -> Vec3 {
        let (s, c) = sin_cos_deg(self.yaw);
        Vec3::new(-c, -s, 0.0)
    }

    fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(GeometryError::InvalidArgument(format!(
                "rotation has non-finite angle: {self:?}"
            )))
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        min.check_finite("aabb min")?;
        max.check_finite("aabb max")?;
        if min.x > max.x || min.y > max.y || min.z > max.z {
            return Err(GeometryError::InvalidArgument(format!(
                "aabb min {min} exceeds max {max}"
            )));
        }
        Ok(Self { min, max })
    }

    /// The box spanning two arbitrary corners.
    pub fn from_corners(a: Vec3, b: Vec3) -> Result<Self> {
        Aabb::new(a.component_min(&b), a.component_max(&b))
    }

    /// A room-style box `[0,w] x [0,d] x [0,h]`.
    pub fn room(width: f64, depth: f64, height: f64) -> Result<Self> {
        Aabb::new(Vec3::ZERO, Vec3::new(width, depth, height))
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn volume(&self) -> f64 {
        let e = self.extents();
        e.x * e.y * e.z
    }

    /// Grows the box by `margin` on every side.
    pub fn expanded(&self, margin: f64) -> Aabb {
        Aabb {
            min: self.min - Vec3::splat(margin),
            max: self.max + Vec3::splat(margin),
        }
    }

    /// Per-axis overlap depth; negative components are gaps.
    pub fn signed_overlap(&self, other: &Aabb) -> Vec3 {
        let axis = |i: usize| {
            self.max.get(i).min(other.max.get(i)) - self.min.get(i).max(other.min.get(i))
        };
        Vec3::new(axis(0), axis(1), axis(2))
    }

    /// Center of the bottom face.
    pub fn bottom_center(&self) -> Vec3 {
        let c = self.center();
        Vec3::new(c.x, c.y, self.min.z)
    }
}

/// Extents of the axis-aligned box enclosing a rotated object box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RotatedSize(pub Vec3);

impl RotatedSize {
    pub fn size(&self) -> Vec3 {
        self.0
    }
}

/// One colliding pair of boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub a_id: String,
    pub b_id: String,
    /// Per-axis overlap depth of the buffer-expanded boxes; moving either
    /// box by this much along one axis clears the collision.
    pub penetration: Vec3,
    /// True when the raw boxes do not intersect and the pair only collides
    /// through the buffer margin.
    pub buffered: bool,
}

impl Overlap {
    pub fn involves(&self, id: &str) -> bool {
        self.a_id == id || self.b_id == id
    }

    /// The id of the other box in the pair, if `id` is part of it.
    pub fn partner(&self, id: &str) -> Option<&str> {
        if self.a_id == id {
            Some(&self.b_id)
        } else if self.b_id == id {
            Some(&self.a_id)
        } else {
            None
        }
    }
}

fn check_size(size: &Vec3) -> Result<()> {
    size.check_finite("size")?;
    if size.x <= 0.0 || size.y <= 0.0 || size.z <= 0.0 {
        return Err(GeometryError::InvalidArgument(format!(
            "size components must be positive, got {size}"
        )));
    }
    Ok(())
}

/// Extents of the AABB around a centered box of `size` after `rot`.
pub fn size_after_rotation(size: Vec3, rot: EulerRotation) -> Result<RotatedSize> {
    check_size(&size)?;
    rot.check_finite()?;
    let m = rot.matrix();
    let s: Vector3<f64> = size.into();
    // The enclosing box of a rotated centered box is |R| * s.
    let extents = m.abs() * s;
    Ok(RotatedSize(extents.into()))
}

/// World AABB of an object whose bottom-center sits at `position`.
pub fn placement_aabb(position: Vec3, size: Vec3, rot: EulerRotation) -> Result<Aabb> {
    position.check_finite("position")?;
    let ext = size_after_rotation(size, rot)?.0;
    Ok(Aabb {
        min: Vec3::new(position.x - ext.x / 2.0, position.y - ext.y / 2.0, position.z),
        max: Vec3::new(
            position.x + ext.x / 2.0,
            position.y + ext.y / 2.0,
            position.z + ext.z,
        ),
    })
}

/// Tests one pair; `half_buffer` is added to every side of both boxes.
pub fn pair_overlap(a_id: &str, a: &Aabb, b_id: &str, b: &Aabb, buffer: f64) -> Option<Overlap> {
    let half = buffer / 2.0;
    let pen = a.expanded(half).signed_overlap(&b.expanded(half));
    if pen.x <= 0.0 || pen.y <= 0.0 || pen.z <= 0.0 {
        return None;
    }
    if pen.x * pen.y * pen.z <= TOUCH_VOLUME_EPSILON {
        return None;
    }
    let raw = a.signed_overlap(b);
    let raw_collides = raw.x > 0.0 && raw.y > 0.0 && raw.z > 0.0 && raw.x * raw.y * raw.z > TOUCH_VOLUME_EPSILON;
    let (a_id, b_id) = if a_id <= b_id { (a_id, b_id) } else { (b_id, a_id) };
    Some(Overlap {
        a_id: a_id.to_string(),
        b_id: b_id.to_string(),
        penetration: pen,
        buffered: !raw_collides,
    })
}

/// Every pair of boxes that collide once each box is grown by `buffer / 2`
/// per side, i.e. every pair closer than `buffer` on all three axes.
///
/// Output pairs have `a_id < b_id` and are sorted by `(a_id, b_id)`.
pub fn detect_collisions(boxes: &[(String, Aabb)], buffer: f64) -> Result<Vec<Overlap>> {
    if !(buffer >= 0.0 && buffer.is_finite()) {
        return Err(GeometryError::InvalidArgument(format!(
            "buffer must be finite and >= 0, got {buffer}"
        )));
    }
    let mut seen = HashSet::with_capacity(boxes.len());
    for (id, b) in boxes {
        if !seen.insert(id.as_str()) {
            return Err(GeometryError::InvalidArgument(format!("duplicate box id {id:?}")));
        }
        b.min.check_finite("aabb min")?;
        b.max.check_finite("aabb max")?;
    }

    // Sweep and prune along x.
    let half = buffer / 2.0;
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| {
        boxes[i]
            .1
            .min
            .x
            .total_cmp(&boxes[j].1.min.x)
            .then_with(|| boxes[i].0.cmp(&boxes[j].0))
    });
    let mut active: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for &i in &order {
        let lo = boxes[i].1.min.x - half;
        active.retain(|&j| boxes[j].1.max.x + half > lo);
        for &j in &active {
            if let Some(o) = pair_overlap(&boxes[i].0, &boxes[i].1, &boxes[j].0, &boxes[j].1, buffer) {
                out.push(o);
            }
        }
        active.push(i);
    }
    out.sort_by(|a, b| (&a.a_id, &a.b_id).cmp(&(&b.a_id, &b.b_id)));
    Ok(out)
}

/// True when `inner` lies within `outer` on every axis (boundaries inclusive).
pub fn contains(outer: &Aabb, inner: &Aabb) -> bool {
    (0..3).all(|i| outer.min.get(i) <= inner.min.get(i) && inner.max.get(i) <= outer.max.get(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cube(lo: f64, hi: f64) -> Aabb {
        Aabb::new(Vec3::splat(lo), Vec3::splat(hi)).unwrap()
    }

    fn approx(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol && (a.z - b.z).abs() <= tol
    }

    #[test]
    fn identity_rotation_keeps_size() {
        let s = size_after_rotation(Vec3::new(2.0, 1.0, 1.0), EulerRotation::IDENTITY).unwrap();
        assert_eq!(s.0, Vec3::new(2.0, 1.0, 1.0));
    }

    #[test]
    fn quarter_yaw_swaps_axes() {
        let s = size_after_rotation(Vec3::new(2.0, 3.0, 1.0), EulerRotation::from_yaw(90.0)).unwrap();
        assert_eq!(s.0, Vec3::new(3.0, 2.0, 1.0));
    }

    #[test]
    fn yaw_45_footprint() {
        let s = size_after_rotation(Vec3::new(2.0, 3.0, 1.0), EulerRotation::from_yaw(45.0)).unwrap();
        let f = 5.0 / 2f64.sqrt();
        assert!(approx(s.0, Vec3::new(f, f, 1.0), 1e-12), "{}", s.0);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(size_after_rotation(Vec3::new(f64::NAN, 1.0, 1.0), EulerRotation::IDENTITY).is_err());
        assert!(size_after_rotation(Vec3::new(1.0, 1.0, 1.0), EulerRotation::new(f64::INFINITY, 0.0, 0.0)).is_err());
        assert!(placement_aabb(Vec3::new(f64::NAN, 0.0, 0.0), Vec3::splat(1.0), EulerRotation::IDENTITY).is_err());
        assert!(size_after_rotation(Vec3::new(0.0, 1.0, 1.0), EulerRotation::IDENTITY).is_err());
    }

    #[test]
    fn angle_normalization() {
        assert_eq!(normalize_degrees(180.0), -180.0);
        assert_eq!(normalize_degrees(270.0), -90.0);
        assert_eq!(normalize_degrees(-190.0), 170.0);
        assert_eq!(normalize_degrees(45.0), 45.0);
        let r = EulerRotation::new(450.0, -540.0, 720.0);
        assert_eq!((r.yaw(), r.pitch(), r.roll()), (90.0, -180.0, 0.0));
    }

    #[test]
    fn placement_aabb_examples() {
        let b = placement_aabb(Vec3::ZERO, Vec3::splat(1.0), EulerRotation::IDENTITY).unwrap();
        assert_eq!(b.min, Vec3::new(-0.5, -0.5, 0.0));
        assert_eq!(b.max, Vec3::new(0.5, 0.5, 1.0));

        let b = placement_aabb(Vec3::new(2.0, 2.0, 0.0), Vec3::new(2.0, 3.0, 1.0), EulerRotation::from_yaw(90.0)).unwrap();
        assert_eq!(b.min, Vec3::new(0.5, 1.0, 0.0));
        assert_eq!(b.max, Vec3::new(3.5, 3.0, 1.0));

        let b = placement_aabb(Vec3::ZERO, Vec3::splat(1.0), EulerRotation::new(0.0, 0.0, 90.0)).unwrap();
        assert_eq!(b.min, Vec3::new(-0.5, -0.5, 0.0));
        assert_eq!(b.max, Vec3::new(0.5, 0.5, 1.0));
    }

    #[test]
    fn collision_examples() {
        let disjoint = vec![("a".to_string(), cube(0.0, 1.0)), ("b".to_string(), cube(2.0, 3.0))];
        assert!(detect_collisions(&disjoint, 0.0).unwrap().is_empty());

        let hit = vec![("a".to_string(), cube(0.0, 1.0)), ("b".to_string(), cube(0.5, 1.5))];
        let o = detect_collisions(&hit, 0.0).unwrap();
        assert_eq!(o.len(), 1);
        assert_eq!(o[0].penetration, Vec3::splat(0.5));
        assert!(!o[0].buffered);

        let near = vec![("a".to_string(), cube(0.0, 1.0)), ("b".to_string(), cube(1.01, 2.0))];
        let o = detect_collisions(&near, 0.02).unwrap();
        assert_eq!(o.len(), 1);
        assert!(o[0].buffered);
        assert!(detect_collisions(&near, 0.0).unwrap().is_empty());
    }

    #[test]
    fn touching_faces_do_not_collide_without_buffer() {
        let touch = vec![("a".to_string(), cube(0.0, 1.0)), ("b".to_string(), cube(1.0, 2.0))];
        assert!(detect_collisions(&touch, 0.0).unwrap().is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dup = vec![("a".to_string(), cube(0.0, 1.0)), ("a".to_string(), cube(2.0, 3.0))];
        assert!(matches!(detect_collisions(&dup, 0.0), Err(GeometryError::InvalidArgument(_))));
        assert!(detect_collisions(&[], -1.0).is_err());
    }

    #[test]
    fn containment_examples() {
        let outer = cube(0.0, 5.0);
        assert!(contains(&outer, &cube(1.0, 2.0)));
        let poke = Aabb::new(Vec3::new(4.0, 0.0, 0.0), Vec3::new(6.0, 1.0, 1.0)).unwrap();
        assert!(!contains(&outer, &poke));
        assert!(contains(&outer, &outer));
    }

    #[test]
    fn front_and_right_vectors() {
        assert!(approx(EulerRotation::IDENTITY.forward(), Vec3::new(0.0, -1.0, 0.0), 0.0));
        assert!(approx(EulerRotation::IDENTITY.right(), Vec3::new(-1.0, 0.0, 0.0), 0.0));
        assert!(approx(EulerRotation::from_yaw(90.0).forward(), Vec3::new(1.0, 0.0, 0.0), 0.0));
    }

    fn rotation() -> impl Strategy<Value = EulerRotation> {
        (-720.0..720.0f64, -720.0..720.0f64, -720.0..720.0f64).prop_map(|(y, p, r)| EulerRotation::new(y, p, r))
    }

    fn size() -> impl Strategy<Value = Vec3> {
        (0.01..10.0f64, 0.01..10.0f64, 0.01..10.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn full_turn_invariance(s in size(), y in -180.0..180.0f64, p in -180.0..180.0f64, r in -180.0..180.0f64) {
            let base = size_after_rotation(s, EulerRotation::new(y, p, r)).unwrap().0;
            for shifted in [
                EulerRotation::new(y + 360.0, p, r),
                EulerRotation::new(y, p + 360.0, r),
                EulerRotation::new(y, p, r + 360.0),
            ] {
                let other = size_after_rotation(s, shifted).unwrap().0;
                prop_assert!(approx(base, other, 1e-9));
            }
        }

        #[test]
        fn extents_between_min_side_and_diagonal(s in size(), r in rotation()) {
            let e = size_after_rotation(s, r).unwrap().0;
            let lo = s.min_component();
            let hi = s.norm();
            for c in [e.x, e.y, e.z] {
                prop_assert!(c >= lo - 1e-12 && c <= hi + 1e-12);
            }
        }

        #[test]
        fn yaw_keeps_height(s in size(), yaw in -720.0..720.0f64) {
            let e = size_after_rotation(s, EulerRotation::from_yaw(yaw)).unwrap().0;
            prop_assert_eq!(e.z, s.z);
        }

        #[test]
        fn quarter_turn_is_exact_swap(s in size(), k in -4i32..4) {
            let yaw = 90.0 * (2 * k + 1) as f64;
            let e = size_after_rotation(s, EulerRotation::from_yaw(yaw)).unwrap().0;
            prop_assert_eq!(e, Vec3::new(s.y, s.x, s.z));
        }

        #[test]
        fn containment_is_transitive(
            a in (0.0..1.0f64, 0.0..1.0f64), b in (0.0..1.0f64, 0.0..1.0f64), c in (0.0..1.0f64, 0.0..1.0f64)
        ) {
            let mk = |(u, v): (f64, f64)| cube(u.min(v), u.max(v));
            let (x, y, z) = (mk(a), mk(b), mk(c));
            if contains(&x, &y) && contains(&y, &z) {
                prop_assert!(contains(&x, &z));
            }
        }
    }
}
