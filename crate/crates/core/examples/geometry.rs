//! Rotated extents and buffered collision detection.
//!
//! cargo run --example geometry

use sceneforge::geometry::{detect_collisions, placement_aabb, size_after_rotation, EulerRotation, Vec3};

fn main() {
    let desk = Vec3::new(1.6, 0.8, 0.75);
    for yaw in [0.0, 30.0, 90.0] {
        let r = size_after_rotation(desk, EulerRotation::from_yaw(yaw)).unwrap();
        println!("desk at yaw {yaw:>4}: size after rotation {}", r.size());
    }

    let boxes = vec![
        ("desk".to_string(), placement_aabb(Vec3::new(2.0, 2.0, 0.0), desk, EulerRotation::default()).unwrap()),
        (
            "chair".to_string(),
            placement_aabb(Vec3::new(2.0, 1.45, 0.0), Vec3::new(0.5, 0.5, 0.9), EulerRotation::from_yaw(180.0)).unwrap(),
        ),
        (
            "bin".to_string(),
            placement_aabb(Vec3::new(2.95, 2.0, 0.0), Vec3::new(0.3, 0.3, 0.4), EulerRotation::default()).unwrap(),
        ),
    ];
    for o in detect_collisions(&boxes, 0.02).unwrap() {
        println!(
            "{} x {}: penetration {}{}",
            o.a_id,
            o.b_id,
            o.penetration,
            if o.buffered { " (buffer only)" } else { "" }
        );
    }
}
