//! Binary glTF export of a placed scene.

use super::SceneDocument;
use crate::asset_library::mesh::{load_mesh, scene_to_native};
use crate::asset_library::{AssetRecord, LibraryManifest, MeshData};
use crate::geometry::Vec3;
use crate::layout::Placement;
use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const GROUND_NODE_NAME: &str = "ground";

const GLB_MAGIC: u32 = 0x4654_6C67;
const CHUNK_JSON: u32 = 0x4E4F_534A;
const CHUNK_BIN: u32 = 0x004E_4942;
const ARRAY_BUFFER: u32 = 34962;
const ELEMENT_ARRAY_BUFFER: u32 = 34963;
const FLOAT: u32 = 5126;
const UNSIGNED_INT: u32 = 5125;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("cannot export; unresolvable placements: {}", .0.join("; "))]
    Unresolved(Vec<String>),
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// The scene-to-native basis change: `C v` maps native coordinates to scene.
fn native_basis() -> Matrix3<f64> {
    Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0)
}

/// Translation and rotation quaternion (`[x, y, z, w]`) of the node that
/// places a mesh centered on its native bounding box.
pub fn gltf_node_transform(placement: &Placement, record: &AssetRecord) -> ([f64; 3], [f64; 4]) {
    let c = native_basis();
    let m = c.transpose() * placement.rotation.matrix() * record.front_yaw_offset.rotation().matrix() * c;
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
    let center = Vec3::new(
        placement.position.x,
        placement.position.y,
        placement.position.z + placement.rotated_size.size().z / 2.0,
    );
    let t = scene_to_native(center);
    ([t.x, t.y, t.z], [q.i, q.j, q.k, q.w])
}

#[derive(Default)]
struct GlbBuilder {
    bin: Vec<u8>,
    views: Vec<Value>,
    accessors: Vec<Value>,
    meshes: Vec<Value>,
}

impl GlbBuilder {
    fn push_view(&mut self, bytes: &[u8], target: u32) -> usize {
        while !self.bin.len().is_multiple_of(4) {
            self.bin.push(0);
        }
        let offset = self.bin.len();
        self.bin.extend_from_slice(bytes);
        self.views.push(json!({
            "buffer": 0, "byteOffset": offset, "byteLength": bytes.len(), "target": target
        }));
        self.views.len() - 1
    }

    fn add_mesh(&mut self, name: &str, positions: &[[f32; 3]], indices: &[u32]) -> usize {
        let mut lo = [f32::INFINITY; 3];
        let mut hi = [f32::NEG_INFINITY; 3];
        let mut bytes = Vec::with_capacity(positions.len() * 12);
        for p in positions {
            for i in 0..3 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
                bytes.extend_from_slice(&p[i].to_le_bytes());
            }
        }
        let view = self.push_view(&bytes, ARRAY_BUFFER);
        self.accessors.push(json!({
            "bufferView": view, "componentType": FLOAT, "count": positions.len(),
            "type": "VEC3", "min": lo, "max": hi
        }));
        let pos_acc = self.accessors.len() - 1;
        let primitive = if indices.is_empty() {
            json!({"attributes": {"POSITION": pos_acc}, "mode": 0})
        } else {
            let bytes: Vec<u8> = indices.iter().flat_map(|i| i.to_le_bytes()).collect();
            let view = self.push_view(&bytes, ELEMENT_ARRAY_BUFFER);
            self.accessors.push(json!({
                "bufferView": view, "componentType": UNSIGNED_INT, "count": indices.len(), "type": "SCALAR"
            }));
            json!({"attributes": {"POSITION": pos_acc}, "indices": self.accessors.len() - 1, "mode": 4})
        };
        self.meshes.push(json!({"name": name, "primitives": [primitive]}));
        self.meshes.len() - 1
    }

    fn finish(mut self, nodes: Vec<Value>) -> Vec<u8> {
        while !self.bin.len().is_multiple_of(4) {
            self.bin.push(0);
        }
        let node_ids: Vec<usize> = (0..nodes.len()).collect();
        let doc = json!({
            "asset": {"version": "2.0", "generator": format!("sceneforge {}", env!("CARGO_PKG_VERSION"))},
            "scene": 0,
            "scenes": [{"nodes": node_ids}],
            "nodes": nodes,
            "meshes": self.meshes,
            "accessors": self.accessors,
            "bufferViews": self.views,
            "buffers": [{"byteLength": self.bin.len()}],
        });
        let mut json_bytes = serde_json::to_vec(&doc).expect("gltf json serializes");
        while !json_bytes.len().is_multiple_of(4) {
            json_bytes.push(b' ');
        }
        let total = 12 + 8 + json_bytes.len() + 8 + self.bin.len();
        let mut out = Vec::with_capacity(total);
        out.extend_from_slice(&GLB_MAGIC.to_le_bytes());
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&(total as u32).to_le_bytes());
        out.extend_from_slice(&(json_bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(&CHUNK_JSON.to_le_bytes());
        out.extend_from_slice(&json_bytes);
        out.extend_from_slice(&(self.bin.len() as u32).to_le_bytes());
        out.extend_from_slice(&CHUNK_BIN.to_le_bytes());
        out.extend_from_slice(&self.bin);
        out
    }
}

fn centered(mesh: &MeshData) -> Vec<[f32; 3]> {
    let Some((lo, hi)) = mesh.bounds() else { return vec![] };
    let c = [
        (lo[0] + hi[0]) / 2.0,
        (lo[1] + hi[1]) / 2.0,
        (lo[2] + hi[2]) / 2.0,
    ];
    mesh.positions
        .iter()
        .map(|p| {
            [
                (p[0] as f64 - c[0]) as f32,
                (p[1] as f64 - c[1]) as f32,
                (p[2] as f64 - c[2]) as f32,
            ]
        })
        .collect()
}

/// Writes the scene as a single GLB (Y-up, as glTF requires) with one node
/// per placement plus a ground plane spanning the floor of the bounds.
///
/// Every placement's asset must be in the manifest and its mesh loadable;
/// otherwise nothing is written and all offenders are listed.
pub fn export_gltf(doc: &SceneDocument, manifest: &LibraryManifest, path: &Path) -> Result<(), ExportError> {
    let mut offenders = Vec::new();
    let mut loaded: BTreeMap<&str, (&AssetRecord, MeshData)> = BTreeMap::new();
    for p in &doc.placements {
        if loaded.contains_key(p.asset_id.as_str()) {
            continue;
        }
        let Some(record) = manifest.get(&p.asset_id) else {
            offenders.push(format!("{}: asset {} not in library", p.slot_id, p.asset_id));
            continue;
        };
        match load_mesh(&record.mesh_path) {
            Ok(mesh) if !mesh.positions.is_empty() => {
                loaded.insert(p.asset_id.as_str(), (record, mesh));
            }
            Ok(_) => offenders.push(format!("{}: mesh {} is empty", p.slot_id, record.mesh_path.display())),
            Err(e) => offenders.push(format!("{}: {}: {e}", p.slot_id, record.mesh_path.display())),
        }
    }
    if !offenders.is_empty() {
        return Err(ExportError::Unresolved(offenders));
    }

    let mut glb = GlbBuilder::default();
    let mut mesh_index = BTreeMap::new();
    for (id, (record, mesh)) in &loaded {
        let m = glb.add_mesh(&record.display_name, &centered(mesh), &mesh.indices);
        mesh_index.insert(*id, m);
    }
    let mut nodes = Vec::with_capacity(doc.placements.len() + 1);
    for p in &doc.placements {
        let (record, _) = &loaded[p.asset_id.as_str()];
        let (t, r) = gltf_node_transform(p, record);
        nodes.push(json!({
            "name": p.slot_id, "mesh": mesh_index[p.asset_id.as_str()], "translation": t, "rotation": r
        }));
    }
    let b = doc.bounds;
    let floor: Vec<[f32; 3]> = [
        (b.min.x, b.min.y),
        (b.max.x, b.min.y),
        (b.max.x, b.max.y),
        (b.min.x, b.max.y),
    ]
    .iter()
    .map(|&(x, y)| {
        let n = scene_to_native(Vec3::new(x, y, b.min.z));
        [n.x as f32, n.y as f32, n.z as f32]
    })
    .collect();
    // Counter-clockwise seen from +y (native up).
    let ground = glb.add_mesh(GROUND_NODE_NAME, &floor, &[0, 2, 1, 0, 3, 2]);
    nodes.push(json!({"name": GROUND_NODE_NAME, "mesh": ground}));

    let bytes = glb.finish(nodes);
    crate::asset_library::manifest::write_atomic(path, &bytes).map_err(|e| ExportError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
