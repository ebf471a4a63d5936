use super::{bounds_context, fmt_num, fmt_vec, objects_listing, AuditRecord, SceneSpec, Stage};
use crate::geometry::{Aabb, EulerRotation, Vec3};
use crate::model_provider::{json_check, PromptFrame, Provider, ProviderRequest, RequestKind};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintSource {
    Explicit,
    Inferred,
}

/// What a constraint asks of its subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "relation", rename_all = "snake_case")]
pub enum Relation {
    OnTopOf { anchor: String },
    InFrontOf { anchor: String },
    Behind { anchor: String },
    LeftOf { anchor: String },
    RightOf { anchor: String },
    AdjacentTo { anchor: String },
    Facing { anchor: String },
    AlignedWith { anchor: String },
    Distance { anchor: String, min: f64, max: f64 },
    WithinRegion { region: Aabb },
    Pose {
        position: Vec3,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation: Option<EulerRotation>,
    },
    /// A relation outside the vocabulary, kept for the record.
    Unknown {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchor: Option<String>,
    },
}

impl Relation {
    pub fn name(&self) -> &str {
        match self {
            Relation::OnTopOf { .. } => "on_top_of",
            Relation::InFrontOf { .. } => "in_front_of",
            Relation::Behind { .. } => "behind",
            Relation::LeftOf { .. } => "left_of",
            Relation::RightOf { .. } => "right_of",
            Relation::AdjacentTo { .. } => "adjacent_to",
            Relation::Facing { .. } => "facing",
            Relation::AlignedWith { .. } => "aligned_with",
            Relation::Distance { .. } => "distance",
            Relation::WithinRegion { .. } => "within_region",
            Relation::Pose { .. } => "pose",
            Relation::Unknown { name, .. } => name,
        }
    }

    pub fn anchor(&self) -> Option<&str> {
        match self {
            Relation::OnTopOf { anchor }
            | Relation::InFrontOf { anchor }
            | Relation::Behind { anchor }
            | Relation::LeftOf { anchor }
            | Relation::RightOf { anchor }
            | Relation::AdjacentTo { anchor }
            | Relation::Facing { anchor }
            | Relation::AlignedWith { anchor }
            | Relation::Distance { anchor, .. } => Some(anchor),
            Relation::Unknown { anchor, .. } => anchor.as_deref(),
            Relation::WithinRegion { .. } | Relation::Pose { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub subject: String,
    #[serde(flatten)]
    pub relation: Relation,
    pub source: ConstraintSource,
}

impl Constraint {
    pub fn new(subject: impl Into<String>, relation: Relation, source: ConstraintSource) -> Self {
        Self {
            subject: subject.into(),
            relation,
            source,
        }
    }

    /// One line for prompts, in the prompt frame.
    pub fn describe(&self, frame: PromptFrame) -> String {
        let s = &self.subject;
        let src = match self.source {
            ConstraintSource::Explicit => "explicit",
            ConstraintSource::Inferred => "inferred",
        };
        let body = match &self.relation {
            Relation::Distance { anchor, min, max } => {
                format!("[{s}] distance to [{anchor}] between {} and {}", fmt_num(*min), fmt_num(*max))
            }
            Relation::WithinRegion { region } => {
                let a = frame.point_to_prompt(region.min);
                let b = frame.point_to_prompt(region.max);
                let lo = [a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2])];
                let hi = [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])];
                format!("[{s}] within_region min {} max {}", fmt_vec(lo), fmt_vec(hi))
            }
            Relation::Pose { position, rotation } => {
                let mut t = format!("[{s}] pose position {}", fmt_vec(frame.point_to_prompt(*position)));
                if let Some(r) = rotation {
                    t.push_str(&format!(" rotation {}", fmt_vec(frame.rotation_to_prompt(*r))));
                }
                t
            }
            other => match other.anchor() {
                Some(a) => format!("[{s}] {} [{a}]", other.name()),
                None => format!("[{s}] {}", other.name()),
            },
        };
        format!("- {body} ({src})")
    }
}

pub(crate) fn constraints_listing(constraints: &[Constraint], frame: PromptFrame) -> String {
    if constraints.is_empty() {
        return "(none)".to_string();
    }
    constraints.iter().map(|c| c.describe(frame)).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, Deserialize)]
pub(crate) struct RawConstraintReply {
    constraints: Vec<RawConstraint>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawConstraint {
    subject: String,
    relation: String,
    anchor: Option<String>,
    min: Option<f64>,
    max: Option<f64>,
    region: Option<RawRegion>,
    position: Option<[f64; 3]>,
    rotation: Option<[f64; 3]>,
    source: Option<ConstraintSource>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawRegion {
    min: [f64; 3],
    max: [f64; 3],
}

fn canonical_relation(name: &str) -> String {
    let n: String = name
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect();
    let n = n.trim_matches('_').to_string();
    match n.as_str() {
        "on" | "on_top" | "on_top_of" | "atop" | "resting_on" => "on_top_of",
        "in_front" | "in_front_of" | "front_of" => "in_front_of",
        "behind" | "in_back_of" | "back_of" => "behind",
        "left" | "left_of" | "to_the_left_of" => "left_of",
        "right" | "right_of" | "to_the_right_of" => "right_of",
        "adjacent" | "adjacent_to" | "next_to" | "beside" => "adjacent_to",
        "facing" | "faces" | "face" | "facing_towards" | "facing_toward" => "facing",
        "aligned" | "aligned_with" | "parallel_to" => "aligned_with",
        "distance" | "distance_between" | "within_distance" => "distance",
        "within_region" | "in_region" | "region" | "within" => "within_region",
        "pose" | "at" | "position" | "absolute" => "pose",
        _ => return n,
    }
    .to_string()
}

/// Looks up a slot id, tolerating brackets and letter case.
fn resolve_slot(spec: &SceneSpec, raw: &str) -> Option<String> {
    let t = raw.trim().trim_start_matches('[').trim_end_matches(']').trim();
    if let Some(s) = spec.slot(t) {
        return Some(s.id.clone());
    }
    spec.slots.iter().find(|s| s.id.eq_ignore_ascii_case(t)).map(|s| s.id.clone())
}

/// Turns one reply entry into a constraint, or explains why not.
fn resolve(raw: &RawConstraint, spec: &SceneSpec, frame: PromptFrame) -> Result<Constraint, String> {
    let subject =
        resolve_slot(spec, &raw.subject).ok_or_else(|| format!("unknown subject {:?}", raw.subject))?;
    let relation_name = canonical_relation(&raw.relation);
    let anchor = || -> Result<String, String> {
        let a = raw
            .anchor
            .as_deref()
            .ok_or_else(|| format!("{relation_name} on {subject} has no anchor"))?;
        let id = resolve_slot(spec, a).ok_or_else(|| format!("unknown anchor {a:?}"))?;
        if id == subject {
            return Err(format!("{subject} is its own anchor"));
        }
        Ok(id)
    };
    let relation = match relation_name.as_str() {
        "on_top_of" => Relation::OnTopOf { anchor: anchor()? },
        "in_front_of" => Relation::InFrontOf { anchor: anchor()? },
        "behind" => Relation::Behind { anchor: anchor()? },
        "left_of" => Relation::LeftOf { anchor: anchor()? },
        "right_of" => Relation::RightOf { anchor: anchor()? },
        "adjacent_to" => Relation::AdjacentTo { anchor: anchor()? },
        "facing" => Relation::Facing { anchor: anchor()? },
        "aligned_with" => Relation::AlignedWith { anchor: anchor()? },
        "distance" => {
            let min = raw.min.unwrap_or(0.0);
            let max = raw.max.ok_or_else(|| format!("distance on {subject} has no max"))?;
            if !(min >= 0.0 && min <= max && max.is_finite()) {
                return Err(format!("distance on {subject} has invalid range [{min}, {max}]"));
            }
            Relation::Distance {
                anchor: anchor()?,
                min,
                max,
            }
        }
        "within_region" => {
            let r = raw
                .region
                .as_ref()
                .ok_or_else(|| format!("within_region on {subject} has no region"))?;
            let region = frame
                .region_from_prompt(r.min, r.max)
                .ok_or_else(|| format!("within_region on {subject} has an invalid region"))?;
            Relation::WithinRegion { region }
        }
        "pose" => {
            let p = raw.position.ok_or_else(|| format!("pose on {subject} has no position"))?;
            Relation::Pose {
                position: frame.point_from_prompt(p),
                rotation: raw.rotation.map(|r| frame.rotation_from_prompt(r)),
            }
        }
        _ => {
            let anchor = match raw.anchor.as_deref() {
                Some(a) => Some(resolve_slot(spec, a).ok_or_else(|| format!("unknown anchor {a:?}"))?),
                None => None,
            };
            Relation::Unknown {
                name: relation_name,
                anchor,
            }
        }
    };
    Ok(Constraint {
        subject,
        relation,
        source: raw.source.unwrap_or(ConstraintSource::Inferred),
    })
}

#[derive(Debug, Clone)]
pub struct ConstraintExtraction {
    pub constraints: Vec<Constraint>,
    pub warnings: Vec<String>,
    /// The provider failed; layout proceeds without constraints.
    pub degraded: bool,
    pub audit: Vec<AuditRecord>,
}

/// Asks the provider for explicit and implied layout constraints.
///
/// Entries naming unknown slots are dropped with a warning, as are exact
/// duplicates. A provider failure yields an empty set flagged degraded.
pub fn extract_constraints(spec: &SceneSpec, provider: &Provider) -> ConstraintExtraction {
    let mut out = ConstraintExtraction {
        constraints: vec![],
        warnings: vec![],
        degraded: false,
        audit: vec![],
    };
    if spec.slots.is_empty() {
        return out;
    }
    let frame = provider.frame();
    let mut ctx = BTreeMap::from([
        ("frame_description".to_string(), frame.description().to_string()),
        ("prompt".to_string(), spec.prompt.clone()),
        ("objects".to_string(), objects_listing(spec, frame)),
    ]);
    ctx.extend(bounds_context(&spec.bounds, frame));
    let prompt = match provider.render_prompt("extract_constraints", &ctx) {
        Ok(p) => p,
        Err(e) => {
            out.degraded = true;
            out.warnings.push(format!("constraint extraction skipped: {e}"));
            return out;
        }
    };
    let reply = ProviderRequest::new(RequestKind::ExtractConstraints, prompt.clone(), vec![])
        .and_then(|r| provider.complete_checked(&r, json_check::<RawConstraintReply>));
    let reply = match reply {
        Ok(r) => r,
        Err(e) => {
            out.degraded = true;
            out.warnings.push(format!("constraint extraction failed, continuing without constraints: {e}"));
            out.audit.push(AuditRecord::from_error(Stage::ExtractConstraints, None, &prompt, &e));
            return out;
        }
    };
    let raw: RawConstraintReply = reply.json().expect("checked reply decodes");
    let mut dropped = Vec::new();
    for entry in &raw.constraints {
        match resolve(entry, spec, frame) {
            Ok(c) if out.constraints.contains(&c) => {}
            Ok(c) => out.constraints.push(c),
            Err(why) => {
                out.warnings.push(format!("constraint dropped: {why}"));
                dropped.push(why);
            }
        }
    }
    out.audit.push(AuditRecord::from_reply(
        Stage::ExtractConstraints,
        None,
        &reply,
        json!({"constraints": out.constraints, "dropped": dropped}),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Slot;
    use crate::model_provider::{FixtureEntry, ScriptedFixture};

    fn spec() -> SceneSpec {
        let slot = |id: &str| Slot {
            id: id.into(),
            asset_id: format!("asset-{id}"),
            display_name: id.into(),
            size: Vec3::splat(1.0),
        };
        SceneSpec::new("p", Aabb::room(5.0, 5.0, 3.0).unwrap(), vec![slot("plant_1"), slot("table_1")]).unwrap()
    }

    fn run(reply: &str) -> ConstraintExtraction {
        let p = Provider::scripted(ScriptedFixture::new(vec![FixtureEntry::new(
            RequestKind::ExtractConstraints,
            [reply],
        )]));
        extract_constraints(&spec(), &p)
    }

    #[test]
    fn resolves_and_drops() {
        let out = run(
            r#"```json
{"constraints": [
 {"subject": "plant_1", "relation": "on top of", "anchor": "[table_1]", "source": "explicit"},
 {"subject": "piano_1", "relation": "behind", "anchor": "table_1"},
 {"subject": "table_1", "relation": "distance", "anchor": "plant_1", "min": 0, "max": 2},
 {"subject": "table_1", "relation": "under", "anchor": "plant_1"}
]}
```"#,
        );
        assert_eq!(out.constraints.len(), 3);
        assert_eq!(
            out.constraints[0].relation,
            Relation::OnTopOf {
                anchor: "table_1".into()
            }
        );
        assert_eq!(out.constraints[2].relation.name(), "under");
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("piano_1"));
        assert!(!out.degraded);
    }

    #[test]
    fn failure_is_degraded_not_fatal() {
        let out = run("I cannot help with that.");
        assert!(out.degraded);
        assert!(out.constraints.is_empty());
        assert_eq!(out.audit.len(), 1);
    }

    #[test]
    fn serde_shape() {
        let c = Constraint::new(
            "plant_1",
            Relation::OnTopOf {
                anchor: "table_1".into(),
            },
            ConstraintSource::Explicit,
        );
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v, json!({"subject": "plant_1", "relation": "on_top_of", "anchor": "table_1", "source": "explicit"}));
        assert_eq!(serde_json::from_value::<Constraint>(v).unwrap(), c);
        let d = Constraint::new(
            "a",
            Relation::Distance {
                anchor: "b".into(),
                min: 0.1,
                max: 1.0 / 3.0,
            },
            ConstraintSource::Inferred,
        );
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<Constraint>(&s).unwrap(), d);
    }
}
