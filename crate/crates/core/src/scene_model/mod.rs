//! The scene document, its validation and its exports.
//!
//! # `scene.json`
//!
//! | field | content |
//! |---|---|
//! | `schema_version` | integer, currently 1 |
//! | `prompt` | the scene description |
//! | `bounds` | `{"min": [x,y,z], "max": [x,y,z]}`, scene frame |
//! | `order` | slot ids in placement order |
//! | `placements` | `slot_id`, `asset_id`, `display_name`, `size`, `position` (bottom center), `rotation` (`yaw`/`pitch`/`roll` degrees), `rotated_size`, optional `flags` |
//! | `constraints` | `subject`, `relation`, relation fields (`anchor`, `min`/`max`, `region`, `position`/`rotation`), `source` |
//! | `verdicts` | refinement verdicts: `slot_id`, `sweep`, `action` (`keep` with `benign_with`, or `move` with `position`/`rotation`), `rationale`, `degraded`, optional `note` |
//! | `collision_report` | `buffer`, `overlaps` (`a_id`, `b_id`, `penetration`, `buffered`), `benign` pairs |
//! | `warnings` | strings |
//! | `meta` | generator, provider tag, prompt library version, prompt frame, build options, usage, optional `created_at` |
//!
//! The scene frame is right-handed, Z-up, meters.

mod gltf_export;
mod validate;

pub use gltf_export::{export_gltf, gltf_node_transform, ExportError, GROUND_NODE_NAME};
pub use validate::{validate, ConstraintCheck, Status, Tolerances, ValidationReport};

use crate::geometry::{Aabb, Overlap};
use crate::layout::{BuildOptions, Constraint, Placement, RefinementVerdict, SceneSpec};
use crate::model_provider::{PromptFrame, Provider, UsageCounters, PROMPT_LIBRARY_VERSION};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

pub const SCENE_SCHEMA_VERSION: u32 = 1;

/// JSON Schema of scene.json, the file external renderers read.
pub const SCENE_JSON_SCHEMA: &str = include_str!("../../schemas/scene.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionReport {
    pub buffer: f64,
    pub overlaps: Vec<Overlap>,
    /// Pairs `[a, b]` (`a < b`) whose overlap a verdict kept as intended.
    pub benign: Vec<[String; 2]>,
}

impl CollisionReport {
    pub fn compute(placements: &[Placement], buffer: f64, benign: &BTreeSet<(String, String)>) -> Self {
        let overlaps = crate::layout::refine::collisions(placements, buffer);
        let benign = overlaps
            .iter()
            .filter(|o| benign.contains(&(o.a_id.clone(), o.b_id.clone())))
            .map(|o| [o.a_id.clone(), o.b_id.clone()])
            .collect();
        Self {
            buffer,
            overlaps,
            benign,
        }
    }

    pub fn is_benign(&self, o: &Overlap) -> bool {
        self.benign.iter().any(|[a, b]| a == &o.a_id && b == &o.b_id)
    }

    pub fn non_benign(&self) -> impl Iterator<Item = &Overlap> {
        self.overlaps.iter().filter(|o| !self.is_benign(o))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneMeta {
    pub generator: String,
    pub provider: String,
    pub prompt_library_version: u32,
    pub prompt_frame: PromptFrame,
    pub buffer: f64,
    pub skip_refinement: bool,
    pub refinement_sweeps: u32,
    pub usage: UsageCounters,
    /// Stages that fell back to a default after a provider failure.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degraded: Vec<crate::layout::Stage>,
    /// Omitted for scripted providers so their output is reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
}

impl SceneMeta {
    pub fn new(
        provider: &Provider,
        options: &BuildOptions,
        usage: UsageCounters,
        degraded: Vec<crate::layout::Stage>,
    ) -> Self {
        Self {
            generator: format!("sceneforge {}", env!("CARGO_PKG_VERSION")),
            provider: provider.tag(),
            prompt_library_version: PROMPT_LIBRARY_VERSION,
            prompt_frame: provider.frame(),
            buffer: options.buffer,
            skip_refinement: options.skip_refinement,
            refinement_sweeps: options.sweeps,
            usage,
            degraded,
            created_at: (!provider.is_scripted())
                .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub schema_version: u32,
    pub prompt: String,
    pub bounds: Aabb,
    pub order: Vec<String>,
    pub placements: Vec<Placement>,
    pub constraints: Vec<Constraint>,
    pub verdicts: Vec<RefinementVerdict>,
    pub collision_report: CollisionReport,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub meta: SceneMeta,
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed scene document: {0}")]
    Format(String),
    #[error("scene schema version {found} is newer than supported version {supported}")]
    NewerVersion { found: u32, supported: u32 },
    #[error("inconsistent scene document: {0}")]
    Inconsistent(String),
}

impl SceneDocument {
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        spec: &SceneSpec,
        placements: Vec<Placement>,
        constraints: Vec<Constraint>,
        order: Vec<String>,
        verdicts: Vec<RefinementVerdict>,
        benign: BTreeSet<(String, String)>,
        warnings: Vec<String>,
        meta: SceneMeta,
    ) -> Self {
        let collision_report = CollisionReport::compute(&placements, meta.buffer, &benign);
        Self {
            schema_version: SCENE_SCHEMA_VERSION,
            prompt: spec.prompt.clone(),
            bounds: spec.bounds,
            order,
            placements,
            constraints,
            verdicts,
            collision_report,
            warnings,
            meta,
        }
    }

    pub fn placement(&self, slot_id: &str) -> Option<&Placement> {
        self.placements.iter().find(|p| p.slot_id == slot_id)
    }

    /// Pretty JSON with a trailing newline. Floats keep full precision, so
    /// parsing and re-serializing reproduces the same bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| SceneError::Format(e.to_string()))?;
        let found = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| SceneError::Format("missing schema_version".into()))?;
        if found > SCENE_SCHEMA_VERSION as u64 {
            return Err(SceneError::NewerVersion {
                found: found.min(u32::MAX as u64) as u32,
                supported: SCENE_SCHEMA_VERSION,
            });
        }
        // Parse from the text, not the Value, so floats take the exact path.
        let doc: SceneDocument = serde_json::from_str(text).map_err(|e| SceneError::Format(e.to_string()))?;
        doc.check()?;
        Ok(doc)
    }

    /// Checks the derived fields against the placements.
    pub fn check(&self) -> Result<(), SceneError> {
        let mut seen = BTreeSet::new();
        for p in &self.placements {
            if !seen.insert(p.slot_id.as_str()) {
                return Err(SceneError::Inconsistent(format!("duplicate slot {}", p.slot_id)));
            }
            let derived = crate::geometry::size_after_rotation(p.size, p.rotation)
                .map_err(|e| SceneError::Inconsistent(format!("{}: {e}", p.slot_id)))?;
            if derived != p.rotated_size {
                return Err(SceneError::Inconsistent(format!(
                    "{}: rotated_size does not match size and rotation",
                    p.slot_id
                )));
            }
            if !p.position.is_finite() {
                return Err(SceneError::Inconsistent(format!("{}: non-finite position", p.slot_id)));
            }
        }
        for [a, b] in &self.collision_report.benign {
            if !self.collision_report.overlaps.iter().any(|o| &o.a_id == a && &o.b_id == b) {
                return Err(SceneError::Inconsistent(format!("benign pair {a}/{b} is not an overlap")));
            }
        }
        Ok(())
    }

    pub fn export_json(&self, path: &Path) -> Result<(), SceneError> {
        crate::asset_library::manifest::write_atomic(path, self.to_json().as_bytes()).map_err(|e| SceneError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn import_json(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|e| SceneError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }
}
