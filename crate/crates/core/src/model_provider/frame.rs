use crate::geometry::{Aabb, EulerRotation, Vec3};
use serde::{Deserialize, Serialize};

/// Coordinate convention used in prompts and replies.
///
/// The scene core is always right-handed Z-up. Some models reason better in
/// the left-handed Y-up convention of game engines; in that frame a core
/// point `(x, y, z)` is written `(x, z, y)` and rotations follow the
/// left-hand rule.
///
/// Rotations travel as `[about_x, about_y, about_z]` in the prompt frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptFrame {
    #[default]
    ZUpRightHanded,
    YUpLeftHanded,
}

impl PromptFrame {
    /// Text inserted into prompts under `{frame_description}`.
    pub fn description(&self) -> &'static str {
        match self {
            PromptFrame::ZUpRightHanded => {
                "Coordinates are right-handed with z pointing up: x runs left to right, y runs from the front of the room to the back, z is height above the floor. Rotations are given as [about x, about y, about z] in degrees, applied in that order (x first, z last), positive counter-clockwise when looking down the axis toward the origin. At rotation [0, 0, 0] an object's front faces -y; rotating 90 degrees about z turns it to face +x."
            }
            PromptFrame::YUpLeftHanded => {
                "Coordinates are left-handed with y pointing up: x runs left to right, z runs from the front of the room to the back, y is height above the floor. Rotations are given as [about x, about y, about z] in degrees and follow the left-hand rule; they are applied x first, then z, then y. At rotation [0, 0, 0] an object's front faces -z; rotating -90 degrees about y turns it to face +x."
            }
        }
    }

    pub fn point_to_prompt(&self, v: Vec3) -> [f64; 3] {
        match self {
            PromptFrame::ZUpRightHanded => v.to_array(),
            PromptFrame::YUpLeftHanded => [v.x, v.z, v.y],
        }
    }

    pub fn point_from_prompt(&self, p: [f64; 3]) -> Vec3 {
        match self {
            PromptFrame::ZUpRightHanded => Vec3::from(p),
            PromptFrame::YUpLeftHanded => Vec3::new(p[0], p[2], p[1]),
        }
    }

    /// Extents map like points; the axis swap never changes signs.
    pub fn size_to_prompt(&self, v: Vec3) -> [f64; 3] {
        self.point_to_prompt(v)
    }

    pub fn region_from_prompt(&self, min: [f64; 3], max: [f64; 3]) -> Option<Aabb> {
        Aabb::from_corners(self.point_from_prompt(min), self.point_from_prompt(max)).ok()
    }

    pub fn rotation_to_prompt(&self, r: EulerRotation) -> [f64; 3] {
        match self {
            PromptFrame::ZUpRightHanded => [r.roll(), r.pitch(), r.yaw()],
            // Conjugating by the y/z swap (a reflection) maps a rotation by
            // t about axis a to a rotation by -t about the swapped axis.
            PromptFrame::YUpLeftHanded => [neg(r.roll()), neg(r.yaw()), neg(r.pitch())],
        }
    }

    pub fn rotation_from_prompt(&self, p: [f64; 3]) -> EulerRotation {
        match self {
            PromptFrame::ZUpRightHanded => EulerRotation::new(p[2], p[1], p[0]),
            PromptFrame::YUpLeftHanded => EulerRotation::new(neg(p[1]), neg(p[2]), neg(p[0])),
        }
    }
}

fn neg(a: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        -a
    }
}
