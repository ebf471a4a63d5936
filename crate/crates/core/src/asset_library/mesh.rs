//! Mesh loading for OBJ and glTF/GLB assets.
//!
//! Mesh files are read in their native frame, which for both formats is
//! Y-up with the object's front facing `+z`. [`native_to_scene`] maps that
//! frame onto the scene's Z-up frame (front facing `-y`).

use crate::geometry::Vec3;
use std::path::Path;

/// Triangle soup in the mesh's native frame, node transforms applied.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeshData {
    pub positions: Vec<[f32; 3]>,
    /// Triangle list; may be empty for point or line assets.
    pub indices: Vec<u32>,
}

impl MeshData {
    /// `(min, max)` corners of the vertex cloud, or `None` when empty.
    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        let mut it = self.positions.iter();
        let first = it.next()?;
        let mut lo = first.map(f64::from);
        let mut hi = lo;
        for p in it {
            for i in 0..3 {
                lo[i] = lo[i].min(p[i] as f64);
                hi[i] = hi[i].max(p[i] as f64);
            }
        }
        Some((lo, hi))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("unsupported mesh format: {0}")]
    Unsupported(String),
    #[error("cannot read mesh: {0}")]
    Read(String),
    #[error("mesh has no vertices")]
    Empty,
    #[error("mesh has zero extent along {0}")]
    Degenerate(char),
}

pub fn is_mesh_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("obj" | "gltf" | "glb")
    )
}

pub fn load_mesh(path: &Path) -> Result<MeshData, MeshError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "obj" => load_obj(path),
        "gltf" | "glb" => load_gltf(path),
        other => Err(MeshError::Unsupported(other.to_string())),
    }
}

fn load_obj(path: &Path) -> Result<MeshData, MeshError> {
    let opts = tobj::LoadOptions {
        triangulate: true,
        single_index: true,
        ..Default::default()
    };
    let (models, _materials) = tobj::load_obj(path, &opts).map_err(|e| MeshError::Read(e.to_string()))?;
    let mut mesh = MeshData::default();
    for model in models {
        let base = mesh.positions.len() as u32;
        mesh.positions
            .extend(model.mesh.positions.chunks_exact(3).map(|c| [c[0], c[1], c[2]]));
        mesh.indices.extend(model.mesh.indices.iter().map(|i| i + base));
    }
    Ok(mesh)
}

fn load_gltf(path: &Path) -> Result<MeshData, MeshError> {
    let gltf = gltf::Gltf::open(path).map_err(|e| MeshError::Read(e.to_string()))?;
    let buffers = gltf::import_buffers(&gltf.document, path.parent(), gltf.blob.clone())
        .map_err(|e| MeshError::Read(e.to_string()))?;
    let mut mesh = MeshData::default();
    let scene = gltf.document.default_scene().or_else(|| gltf.document.scenes().next());
    let identity = nalgebra::Matrix4::<f32>::identity();
    match scene {
        Some(scene) => {
            for node in scene.nodes() {
                collect_node(&node, &identity, &buffers, &mut mesh);
            }
        }
        None => {
            for node in gltf.document.nodes() {
                collect_node(&node, &identity, &buffers, &mut mesh);
            }
        }
    }
    Ok(mesh)
}

fn collect_node(
    node: &gltf::Node<'_>,
    parent: &nalgebra::Matrix4<f32>,
    buffers: &[gltf::buffer::Data],
    out: &mut MeshData,
) {
    let local = nalgebra::Matrix4::from(node.transform().matrix());
    let world = parent * local;
    if let Some(m) = node.mesh() {
        for prim in m.primitives() {
            let reader = prim.reader(|b| buffers.get(b.index()).map(|d| &d.0[..]));
            let Some(positions) = reader.read_positions() else { continue };
            let base = out.positions.len() as u32;
            let count_before = out.positions.len();
            out.positions.extend(positions.map(|p| {
                let v = world * nalgebra::Vector4::new(p[0], p[1], p[2], 1.0);
                [v.x, v.y, v.z]
            }));
            let added = (out.positions.len() - count_before) as u32;
            if prim.mode() == gltf::mesh::Mode::Triangles {
                match reader.read_indices() {
                    Some(ix) => out.indices.extend(ix.into_u32().map(|i| i + base)),
                    None => out.indices.extend((0..added).map(|i| i + base)),
                }
            }
        }
    }
    for child in node.children() {
        collect_node(&child, &world, buffers, out);
    }
}

/// Axis-aligned extents of a mesh in its native frame.
pub fn measure_mesh(mesh: &MeshData) -> Result<Vec3, MeshError> {
    let (lo, hi) = mesh.bounds().ok_or(MeshError::Empty)?;
    let ext = Vec3::new(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]);
    for (axis, v) in ['x', 'y', 'z'].into_iter().zip(ext.to_array()) {
        if !(v > 0.0 && v.is_finite()) {
            return Err(MeshError::Degenerate(axis));
        }
    }
    Ok(ext)
}

/// Native (Y-up, front `+z`) to scene (Z-up, front `-y`).
pub fn native_to_scene(v: Vec3) -> Vec3 {
    Vec3::new(v.x, -v.z, v.y)
}

/// Scene (Z-up) to native / glTF (Y-up).
pub fn scene_to_native(v: Vec3) -> Vec3 {
    Vec3::new(v.x, v.z, -v.y)
}

/// Native extents expressed along scene axes.
pub fn native_extents_to_scene(e: Vec3) -> Vec3 {
    Vec3::new(e.x, e.z, e.y)
}

/// Writes an axis-aligned box as a Wavefront OBJ (native frame).
pub fn write_box_obj(path: &Path, size: Vec3) -> std::io::Result<()> {
    let (x, y, z) = (size.x / 2.0, size.y / 2.0, size.z / 2.0);
    let mut s = String::from("# box\n");
    for (sx, sy, sz) in [
        (-1., -1., -1.),
        (1., -1., -1.),
        (1., 1., -1.),
        (-1., 1., -1.),
        (-1., -1., 1.),
        (1., -1., 1.),
        (1., 1., 1.),
        (-1., 1., 1.),
    ] {
        s.push_str(&format!("v {} {} {}\n", sx * x, sy * y, sz * z));
    }
    for f in [
        [1, 3, 2],
        [1, 4, 3],
        [5, 6, 7],
        [5, 7, 8],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 4, 8],
        [3, 8, 7],
        [4, 1, 5],
        [4, 5, 8],
    ] {
        s.push_str(&format!("f {} {} {}\n", f[0], f[1], f[2]));
    }
    std::fs::write(path, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_measures_one() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.obj");
        write_box_obj(&p, Vec3::splat(1.0)).unwrap();
        let m = load_mesh(&p).unwrap();
        assert_eq!(m.indices.len(), 36);
        assert_eq!(measure_mesh(&m).unwrap(), Vec3::splat(1.0));
    }

    #[test]
    fn scaled_cube_measures_scale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("box.obj");
        write_box_obj(&p, Vec3::new(2.0, 1.0, 3.0)).unwrap();
        assert_eq!(measure_mesh(&load_mesh(&p).unwrap()).unwrap(), Vec3::new(2.0, 1.0, 3.0));
    }

    #[test]
    fn empty_and_flat_meshes_are_errors() {
        assert_eq!(measure_mesh(&MeshData::default()), Err(MeshError::Empty));
        let flat = MeshData {
            positions: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 1.0]],
            indices: vec![],
        };
        assert_eq!(measure_mesh(&flat), Err(MeshError::Degenerate('y')));
    }

    #[test]
    fn frame_maps_are_inverse() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(scene_to_native(native_to_scene(v)), v);
        assert_eq!(native_to_scene(Vec3::new(0.0, 0.0, 1.0)), Vec3::new(0.0, -1.0, 0.0));
    }

    #[test]
    fn unsupported_extension() {
        assert!(matches!(load_mesh(Path::new("a.stl")), Err(MeshError::Unsupported(_))));
        assert!(!is_mesh_file(Path::new("a.png")));
        assert!(is_mesh_file(Path::new("A.GLB")));
    }
}
