//! Scene layout: constraints, placement order, one-at-a-time placement and
//! collision refinement.
//!
//! All positions and rotations live in the scene frame (see
//! [`crate::geometry`]). Prompts and replies may use another frame; the
//! provider's [`PromptFrame`](crate::model_provider::PromptFrame) converts
//! at the boundary.

mod constraints;
mod order;
mod place;
pub(crate) mod refine;

pub use constraints::{extract_constraints, Constraint, ConstraintExtraction, ConstraintSource, Relation};
pub use order::{order_slots, resolve_order, OrderOutcome};
pub use place::{clamp_to_bounds, initial_pass, place_next, InitialPass, PlaceStep};
pub use refine::{refine_pass, RefineOptions, RefineOutcome, RefinementVerdict, VerdictAction};

use crate::asset_library::LibraryManifest;
use crate::geometry::{placement_aabb, size_after_rotation, Aabb, EulerRotation, GeometryError, RotatedSize, Vec3};
use crate::model_provider::{PromptFrame, ProviderError, ProviderReply};
use crate::retrieval::RetrievalDecision;
use crate::scene_model::{SceneDocument, SceneMeta};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};

/// One object instance to be placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    /// `sofa_1`, `chair_3`, ...
    pub id: String,
    pub asset_id: String,
    /// The requested object name.
    pub display_name: String,
    /// Canonical (front-corrected) extents of the asset.
    pub size: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub prompt: String,
    pub bounds: Aabb,
    pub slots: Vec<Slot>,
}

#[derive(Debug, thiserror::Error)]
pub enum LayoutError {
    #[error("invalid scene spec: {0}")]
    Spec(String),
    #[error("placing {slot_id} failed: {source}")]
    Placement {
        slot_id: String,
        #[source]
        source: ProviderError,
    },
    #[error("{stage} failed: {source}")]
    Provider {
        stage: Stage,
        #[source]
        source: ProviderError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Lowercase identifier form of an object name: `"L-shaped sofa"` → `l_shaped_sofa`.
pub fn slot_base(name: &str) -> String {
    let mut out = String::new();
    for c in name.trim().chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    let out = out.trim_end_matches('_').to_string();
    if out.is_empty() {
        "object".to_string()
    } else {
        out
    }
}

impl SceneSpec {
    pub fn new(prompt: impl Into<String>, bounds: Aabb, slots: Vec<Slot>) -> Result<Self, LayoutError> {
        let mut seen = HashSet::new();
        for s in &slots {
            if !seen.insert(s.id.as_str()) {
                return Err(LayoutError::Spec(format!("duplicate slot id {:?}", s.id)));
            }
            if !(s.size.is_finite() && s.size.x > 0.0 && s.size.y > 0.0 && s.size.z > 0.0) {
                return Err(LayoutError::Spec(format!("slot {} has invalid size {}", s.id, s.size)));
            }
        }
        Ok(Self {
            prompt: prompt.into(),
            bounds,
            slots,
        })
    }

    /// One slot per instance of every selected asset, in decision order.
    /// Counts expand to numbered slots sharing one asset.
    pub fn from_decisions(
        prompt: &str,
        bounds: Aabb,
        decisions: &[RetrievalDecision],
        manifest: &LibraryManifest,
    ) -> Result<(Self, Vec<String>), LayoutError> {
        let mut slots: Vec<Slot> = Vec::new();
        let mut warnings = Vec::new();
        for d in decisions {
            let Some(asset_id) = d.selected() else { continue };
            let Some(record) = manifest.get(asset_id) else {
                warnings.push(format!("{}: asset {asset_id} is not in the library; skipped", d.required.name));
                continue;
            };
            let base = slot_base(&d.required.name);
            let mut n = slots.iter().filter(|s| slot_base(&s.display_name) == base).count();
            for _ in 0..d.required.count.max(1) {
                n += 1;
                slots.push(Slot {
                    id: format!("{base}_{n}"),
                    asset_id: asset_id.to_string(),
                    display_name: d.required.name.clone(),
                    size: record.canonical_size(),
                });
            }
        }
        Ok((Self::new(prompt, bounds, slots)?, warnings))
    }

    pub fn slot(&self, id: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementFlag {
    /// The reply put the object outside the bounds; the position was clamped.
    ClampedToBounds,
    /// The object is larger than the bounds along some axis.
    ExceedsBounds,
    /// A refinement move was rejected because it added a collision.
    MoveRejected,
    /// A refinement reply could not be parsed; the object was kept.
    VerdictDegraded,
}

/// A placed object instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub slot_id: String,
    pub asset_id: String,
    pub display_name: String,
    /// Canonical extents of the asset.
    pub size: Vec3,
    /// Bottom center of the bounding box.
    pub position: Vec3,
    pub rotation: EulerRotation,
    /// Always computed from `size` and `rotation`, never taken from a reply.
    pub rotated_size: RotatedSize,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<PlacementFlag>,
}

impl Placement {
    pub fn new(slot: &Slot, position: Vec3, rotation: EulerRotation) -> Result<Self, GeometryError> {
        if !position.is_finite() {
            return Err(GeometryError::InvalidArgument(format!("non-finite position {position}")));
        }
        Ok(Self {
            slot_id: slot.id.clone(),
            asset_id: slot.asset_id.clone(),
            display_name: slot.display_name.clone(),
            size: slot.size,
            position,
            rotation,
            rotated_size: size_after_rotation(slot.size, rotation)?,
            flags: BTreeSet::new(),
        })
    }

    /// The same object at a new pose.
    pub fn moved(&self, position: Vec3, rotation: EulerRotation) -> Result<Self, GeometryError> {
        if !position.is_finite() {
            return Err(GeometryError::InvalidArgument(format!("non-finite position {position}")));
        }
        Ok(Self {
            position,
            rotation,
            rotated_size: size_after_rotation(self.size, rotation)?,
            ..self.clone()
        })
    }

    pub fn aabb(&self) -> Aabb {
        placement_aabb(self.position, self.size, self.rotation).expect("placements hold validated poses")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ExtractConstraints,
    Order,
    Place,
    Refine,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::ExtractConstraints => "constraint extraction",
            Stage::Order => "ordering",
            Stage::Place => "placement",
            Stage::Refine => "refinement",
        })
    }
}

/// One provider interaction, as written to `scene.audit.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot_id: Option<String>,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    pub attempts: u32,
    /// What the reply was turned into.
    pub result: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AuditRecord {
    fn from_reply(stage: Stage, slot_id: Option<&str>, reply: &ProviderReply, result: serde_json::Value) -> Self {
        Self {
            stage,
            slot_id: slot_id.map(str::to_string),
            prompt: reply.prompt.clone(),
            reply: Some(reply.text.clone()),
            attempts: reply.attempts,
            result,
            error: None,
        }
    }

    fn from_error(stage: Stage, slot_id: Option<&str>, prompt: &str, error: &ProviderError) -> Self {
        let (reply, attempts) = match error {
            ProviderError::Validation { raw, attempts, .. } => (Some(raw.clone()), *attempts),
            _ => (None, 1),
        };
        Self {
            stage,
            slot_id: slot_id.map(str::to_string),
            prompt: prompt.to_string(),
            reply,
            attempts,
            result: serde_json::Value::Null,
            error: Some(error.to_string()),
        }
    }
}

pub fn audit_to_jsonl(records: &[AuditRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("audit record serializes") + "\n")
        .collect()
}

/// Compact decimal form for prompts: at most 3 decimals, no trailing zeros.
pub(crate) fn fmt_num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

pub(crate) fn fmt_vec(v: [f64; 3]) -> String {
    format!("[{}, {}, {}]", fmt_num(v[0]), fmt_num(v[1]), fmt_num(v[2]))
}

pub(crate) fn objects_listing(spec: &SceneSpec, frame: PromptFrame) -> String {
    if spec.slots.is_empty() {
        return "(none)".to_string();
    }
    spec.slots
        .iter()
        .map(|s| format!("- [{}] {}, size {}", s.id, s.display_name, fmt_vec(frame.size_to_prompt(s.size))))
        .collect::<Vec<_>>()
        .join("\n")
}

pub(crate) fn placements_listing(placed: &[Placement], frame: PromptFrame) -> String {
    if placed.is_empty() {
        return "(none)".to_string();
    }
    placed
        .iter()
        .map(|p| {
            format!(
                "- [{}] {}: position {}, rotation {}, size {}, size after rotation {}",
                p.slot_id,
                p.display_name,
                fmt_vec(frame.point_to_prompt(p.position)),
                fmt_vec(frame.rotation_to_prompt(p.rotation)),
                fmt_vec(frame.size_to_prompt(p.size)),
                fmt_vec(frame.size_to_prompt(p.rotated_size.0)),
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub(crate) fn bounds_context(bounds: &Aabb, frame: PromptFrame) -> [(String, String); 2] {
    let lo = frame.point_to_prompt(bounds.min);
    let hi = frame.point_to_prompt(bounds.max);
    // The frame map is an axis permutation, so corners stay corners.
    let min = [lo[0].min(hi[0]), lo[1].min(hi[1]), lo[2].min(hi[2])];
    let max = [lo[0].max(hi[0]), lo[1].max(hi[1]), lo[2].max(hi[2])];
    [
        ("bounds_min".to_string(), fmt_vec(min)),
        ("bounds_max".to_string(), fmt_vec(max)),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub buffer: f64,
    pub skip_refinement: bool,
    /// Refinement sweeps, 1 to 3.
    pub sweeps: u32,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            buffer: crate::geometry::DEFAULT_COLLISION_BUFFER,
            skip_refinement: false,
            sweeps: 1,
        }
    }
}

#[derive(Debug)]
pub struct BuildOutput {
    pub document: SceneDocument,
    pub audit: Vec<AuditRecord>,
}

/// A failed build, with whatever was produced before the failure.
#[derive(Debug, thiserror::Error)]
#[error("scene build failed: {source}")]
pub struct BuildError {
    #[source]
    pub source: LayoutError,
    pub partial: Option<SceneDocument>,
    pub audit: Vec<AuditRecord>,
}

/// Constraints, order, initial placement and (unless skipped) refinement.
#[allow(clippy::result_large_err)]
pub fn build_scene(
    prompt: &str,
    bounds: Aabb,
    decisions: &[RetrievalDecision],
    manifest: &LibraryManifest,
    provider: &crate::model_provider::Provider,
    options: &BuildOptions,
) -> Result<BuildOutput, BuildError> {
    let fail = |source, partial, audit| BuildError { source, partial, audit };
    if !(options.buffer >= 0.0 && options.buffer.is_finite()) {
        return Err(fail(LayoutError::Spec(format!("invalid buffer {}", options.buffer)), None, vec![]));
    }
    if !(1..=3).contains(&options.sweeps) {
        return Err(fail(LayoutError::Spec("refinement sweeps must be 1 to 3".into()), None, vec![]));
    }
    let usage_before = provider.usage();
    let (spec, mut warnings) =
        SceneSpec::from_decisions(prompt, bounds, decisions, manifest).map_err(|e| fail(e, None, vec![]))?;
    for d in decisions {
        if d.selected().is_none() {
            warnings.push(format!("{}: no matching asset; not placed", d.required.name));
        }
    }
    let mut audit = Vec::new();
    let mut degraded = Vec::new();

    let extraction = extract_constraints(&spec, provider);
    audit.extend(extraction.audit);
    warnings.extend(extraction.warnings);
    if extraction.degraded {
        degraded.push(Stage::ExtractConstraints);
    }
    let constraints = extraction.constraints;

    let ordering = order_slots(&spec, &constraints, provider);
    audit.extend(ordering.audit);
    warnings.extend(ordering.warnings);
    if ordering.degraded {
        degraded.push(Stage::Order);
    }

    let initial = match initial_pass(&spec, &constraints, &ordering.order, provider, options.buffer) {
        Ok(p) => p,
        Err((e, partial)) => {
            audit.extend(partial.audit);
            let usage = provider.usage().minus(&usage_before);
            let doc = SceneDocument::assemble(
                &spec,
                partial.placements,
                constraints,
                ordering.order,
                vec![],
                BTreeSet::new(),
                warnings,
                SceneMeta::new(provider, options, usage, degraded.clone()),
            );
            return Err(fail(e, Some(doc), audit));
        }
    };
    audit.extend(initial.audit);

    let (placements, verdicts, benign) = if options.skip_refinement || spec.slots.is_empty() {
        (initial.placements, vec![], BTreeSet::new())
    } else {
        let refine_options = RefineOptions {
            buffer: options.buffer,
            sweeps: options.sweeps,
        };
        match refine_pass(&spec, &constraints, initial.placements.clone(), provider, &refine_options) {
            Ok(r) => {
                audit.extend(r.audit);
                if r.verdicts.iter().any(|v| v.degraded) {
                    degraded.push(Stage::Refine);
                }
                (r.placements, r.verdicts, r.benign)
            }
            Err((e, partial_audit)) => {
                audit.extend(partial_audit);
                let usage = provider.usage().minus(&usage_before);
                let doc = SceneDocument::assemble(
                    &spec,
                    initial.placements,
                    constraints,
                    ordering.order,
                    vec![],
                    BTreeSet::new(),
                    warnings,
                    SceneMeta::new(provider, options, usage, degraded.clone()),
                );
                return Err(fail(e, Some(doc), audit));
            }
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    let usage = provider.usage().minus(&usage_before);
    let document = SceneDocument::assemble(
        &spec,
        placements,
        constraints,
        ordering.order,
        verdicts,
        benign,
        warnings,
        SceneMeta::new(provider, options, usage, degraded.clone()),
    );
    Ok(BuildOutput { document, audit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_bases() {
        assert_eq!(slot_base("L-shaped sofa"), "l_shaped_sofa");
        assert_eq!(slot_base("  small   table "), "small_table");
        assert_eq!(slot_base("!!"), "object");
    }

    #[test]
    fn numbers_for_prompts() {
        assert_eq!(fmt_num(2.5), "2.5");
        assert_eq!(fmt_num(-0.0001), "0");
        assert_eq!(fmt_num(3.0), "3");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333");
    }

    #[test]
    fn placement_size_is_derived() {
        let slot = Slot {
            id: "t_1".into(),
            asset_id: "a".into(),
            display_name: "t".into(),
            size: Vec3::new(2.0, 3.0, 1.0),
        };
        let p = Placement::new(&slot, Vec3::new(2.0, 2.0, 0.0), EulerRotation::from_yaw(90.0)).unwrap();
        assert_eq!(p.rotated_size.0, Vec3::new(3.0, 2.0, 1.0));
        assert_eq!(p.aabb().min, Vec3::new(0.5, 1.0, 0.0));
        assert!(Placement::new(&slot, Vec3::new(f64::NAN, 0.0, 0.0), EulerRotation::IDENTITY).is_err());
    }
}
