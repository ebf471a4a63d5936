use super::constraints::constraints_listing;
use super::place::clamp_to_bounds;
use super::{
    bounds_context, fmt_num, fmt_vec, placements_listing, AuditRecord, Constraint, LayoutError, Placement,
    PlacementFlag, SceneSpec, Stage,
};
use crate::geometry::{contains, detect_collisions, EulerRotation, Overlap, Vec3};
use crate::model_provider::{ParsedReply, PromptFrame, Provider, ProviderRequest, RequestKind};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum VerdictAction {
    /// Stay put; overlaps with `benign_with` are intended.
    Keep { benign_with: Vec<String> },
    Move { position: Vec3, rotation: EulerRotation },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementVerdict {
    pub slot_id: String,
    /// 1-based sweep number.
    pub sweep: u32,
    #[serde(flatten)]
    pub action: VerdictAction,
    pub rationale: String,
    /// The reply could not be parsed and the object was kept.
    #[serde(default)]
    pub degraded: bool,
    /// Why a requested move was not applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawVerdict {
    action: String,
    position: Option<[f64; 3]>,
    rotation: Option<[f64; 3]>,
    benign_with: Option<Vec<String>>,
    #[serde(default)]
    rationale: String,
}

fn verdict_check(parsed: &ParsedReply) -> Result<(), String> {
    let ParsedReply::Json(v) = parsed else {
        return Err("reply is not JSON".into());
    };
    let raw = RawVerdict::deserialize(v).map_err(|e| e.to_string())?;
    if raw.action == "move" {
        let finite = raw
            .position
            .iter()
            .chain(raw.rotation.iter())
            .flatten()
            .all(|x| x.is_finite());
        if raw.position.is_none() || raw.rotation.is_none() || !finite {
            return Err("a move needs a finite position and rotation".into());
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOptions {
    pub buffer: f64,
    pub sweeps: u32,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            buffer: crate::geometry::DEFAULT_COLLISION_BUFFER,
            sweeps: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub placements: Vec<Placement>,
    pub verdicts: Vec<RefinementVerdict>,
    /// Slot id pairs `(a, b)`, `a < b`, whose overlap was kept as intended.
    pub benign: BTreeSet<(String, String)>,
    pub audit: Vec<AuditRecord>,
    pub non_benign_before: usize,
    pub non_benign_after: usize,
}

pub(crate) fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

pub(crate) fn collisions(placements: &[Placement], buffer: f64) -> Vec<Overlap> {
    let boxes: Vec<(String, crate::geometry::Aabb)> =
        placements.iter().map(|p| (p.slot_id.clone(), p.aabb())).collect();
    detect_collisions(&boxes, buffer).expect("slot ids are unique and boxes finite")
}

fn non_benign_partners(overlaps: &[Overlap], id: &str, benign: &BTreeSet<(String, String)>) -> BTreeSet<String> {
    overlaps
        .iter()
        .filter_map(|o| o.partner(id))
        .filter(|p| !benign.contains(&pair_key(id, p)))
        .map(str::to_string)
        .collect()
}

fn count_non_benign(overlaps: &[Overlap], benign: &BTreeSet<(String, String)>) -> usize {
    overlaps
        .iter()
        .filter(|o| !benign.contains(&pair_key(&o.a_id, &o.b_id)))
        .count()
}

fn collision_listing(
    overlaps: &[Overlap],
    placements: &[Placement],
    benign: &BTreeSet<(String, String)>,
    frame: PromptFrame,
) -> String {
    if overlaps.is_empty() {
        return "(none)".to_string();
    }
    let size = |id: &str| {
        placements
            .iter()
            .find(|p| p.slot_id == id)
            .map(|p| fmt_vec(frame.size_to_prompt(p.rotated_size.0)))
            .unwrap_or_default()
    };
    overlaps
        .iter()
        .map(|o| {
            let mut line = format!(
                "- [{}] x [{}]: penetration {}, size after rotation [{}] {}, [{}] {}",
                o.a_id,
                o.b_id,
                fmt_vec(frame.size_to_prompt(o.penetration)),
                o.a_id,
                size(&o.a_id),
                o.b_id,
                size(&o.b_id),
            );
            if o.buffered {
                line.push_str(" (within buffer only)");
            }
            if benign.contains(&pair_key(&o.a_id, &o.b_id)) {
                line.push_str(" (accepted as intended)");
            }
            line
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Second phase: hands each colliding object, in placement order, the full
/// collision list and applies the provider's keep or move verdict.
///
/// Objects without unresolved collisions are skipped without a call.
/// Collisions are recomputed after every applied move. A move that would
/// add a collision partner the object did not already have is rejected and
/// the object kept, so the number of unresolved collisions never grows.
/// Positions of moves are clamped to the bounds; rotations are applied as
/// given.
pub fn refine_pass(
    spec: &SceneSpec,
    constraints: &[Constraint],
    mut placements: Vec<Placement>,
    provider: &Provider,
    options: &RefineOptions,
) -> Result<RefineOutcome, (LayoutError, Vec<AuditRecord>)> {
    let frame = provider.frame();
    let mut benign: BTreeSet<(String, String)> = BTreeSet::new();
    let mut verdicts = Vec::new();
    let mut audit = Vec::new();
    let mut overlaps = collisions(&placements, options.buffer);
    let non_benign_before = count_non_benign(&overlaps, &benign);
    let base_ctx = {
        let mut ctx = BTreeMap::from([
            ("frame_description".to_string(), frame.description().to_string()),
            ("prompt".to_string(), spec.prompt.clone()),
            ("constraints".to_string(), constraints_listing(constraints, frame)),
            ("buffer".to_string(), fmt_num(options.buffer)),
        ]);
        ctx.extend(bounds_context(&spec.bounds, frame));
        ctx
    };

    for sweep in 1..=options.sweeps.max(1) {
        if count_non_benign(&overlaps, &benign) == 0 {
            break;
        }
        for i in 0..placements.len() {
            let id = placements[i].slot_id.clone();
            let partners = non_benign_partners(&overlaps, &id, &benign);
            if partners.is_empty() {
                continue;
            }
            let mut ctx = base_ctx.clone();
            ctx.insert("placements".into(), placements_listing(&placements, frame));
            ctx.insert("collisions".into(), collision_listing(&overlaps, &placements, &benign, frame));
            ctx.insert("slot_id".into(), id.clone());
            ctx.insert("name".into(), placements[i].display_name.clone());
            ctx.insert(
                "partners".into(),
                partners.iter().map(|p| format!("[{p}]")).collect::<Vec<_>>().join(", "),
            );
            let prompt = provider
                .render_prompt("refine", &ctx)
                .map_err(|e| (LayoutError::Provider { stage: Stage::Refine, source: e.into() }, audit.clone()))?;
            let reply = ProviderRequest::new(RequestKind::Refine, prompt.clone(), vec![])
                .and_then(|r| provider.complete_checked(&r, verdict_check));
            let reply = match reply {
                Ok(r) => r,
                Err(e) if e.is_transport() => {
                    audit.push(AuditRecord::from_error(Stage::Refine, Some(&id), &prompt, &e));
                    return Err((LayoutError::Provider { stage: Stage::Refine, source: e }, audit));
                }
                Err(e) => {
                    log::warn!("refinement verdict for {id} unusable, keeping it: {e}");
                    audit.push(AuditRecord::from_error(Stage::Refine, Some(&id), &prompt, &e));
                    placements[i].flags.insert(PlacementFlag::VerdictDegraded);
                    verdicts.push(RefinementVerdict {
                        slot_id: id.clone(),
                        sweep,
                        action: VerdictAction::Keep { benign_with: vec![] },
                        rationale: String::new(),
                        degraded: true,
                        note: Some(e.to_string()),
                    });
                    continue;
                }
            };
            let raw: RawVerdict = reply.json().expect("checked reply decodes");
            let verdict = match raw.action.as_str() {
                "move" => {
                    let requested = frame.point_from_prompt(raw.position.expect("checked"));
                    let rotation = frame.rotation_from_prompt(raw.rotation.expect("checked"));
                    apply_move(spec, &mut placements, i, requested, rotation, &benign, options.buffer, &raw.rationale, sweep)
                }
                _ => {
                    let benign_with: Vec<String> = match &raw.benign_with {
                        None => partners.iter().cloned().collect(),
                        Some(list) => list
                            .iter()
                            .map(|s| s.trim().trim_start_matches('[').trim_end_matches(']').to_string())
                            .filter(|s| partners.contains(s))
                            .collect(),
                    };
                    for p in &benign_with {
                        benign.insert(pair_key(&id, p));
                    }
                    RefinementVerdict {
                        slot_id: id.clone(),
                        sweep,
                        action: VerdictAction::Keep { benign_with },
                        rationale: raw.rationale.clone(),
                        degraded: false,
                        note: None,
                    }
                }
            };
            overlaps = collisions(&placements, options.buffer);
            audit.push(AuditRecord::from_reply(Stage::Refine, Some(&id), &reply, serde_json::to_value(&verdict).unwrap_or(json!(null))));
            verdicts.push(verdict);
        }
    }
    let non_benign_after = count_non_benign(&overlaps, &benign);
    benign.retain(|(a, b)| overlaps.iter().any(|o| &o.a_id == a && &o.b_id == b));
    Ok(RefineOutcome {
        placements,
        verdicts,
        benign,
        audit,
        non_benign_before,
        non_benign_after,
    })
}

#[allow(clippy::too_many_arguments)]
fn apply_move(
    spec: &SceneSpec,
    placements: &mut [Placement],
    i: usize,
    requested: Vec3,
    rotation: EulerRotation,
    benign: &BTreeSet<(String, String)>,
    buffer: f64,
    rationale: &str,
    sweep: u32,
) -> RefinementVerdict {
    let id = placements[i].slot_id.clone();
    let keep = |note: String| RefinementVerdict {
        slot_id: id.clone(),
        sweep,
        action: VerdictAction::Keep { benign_with: vec![] },
        rationale: rationale.to_string(),
        degraded: false,
        note: Some(note),
    };
    let Ok(mut candidate) = placements[i].moved(requested, rotation) else {
        return keep("move rejected: invalid pose".into());
    };
    if !contains(&spec.bounds.expanded(buffer), &candidate.aabb()) {
        let (clamped, fits) = clamp_to_bounds(candidate.position, candidate.rotated_size.0, &spec.bounds);
        candidate = candidate.moved(clamped, rotation).expect("clamped pose is finite");
        candidate.flags.insert(PlacementFlag::ClampedToBounds);
        if !fits {
            candidate.flags.insert(PlacementFlag::ExceedsBounds);
        }
    }
    if candidate.position == placements[i].position && candidate.rotation == placements[i].rotation {
        return keep("move ignored: pose unchanged".into());
    }
    let before = non_benign_partners(&collisions(placements, buffer), &id, benign);
    let original = std::mem::replace(&mut placements[i], candidate);
    let after = non_benign_partners(&collisions(placements, buffer), &id, benign);
    let added: Vec<&String> = after.difference(&before).collect();
    if !added.is_empty() {
        placements[i] = original;
        placements[i].flags.insert(PlacementFlag::MoveRejected);
        return keep(format!("move rejected: it would add collisions with {added:?}"));
    }
    RefinementVerdict {
        slot_id: id.clone(),
        sweep,
        action: VerdictAction::Move {
            position: placements[i].position,
            rotation: placements[i].rotation,
        },
        rationale: rationale.to_string(),
        degraded: false,
        note: None,
    }
}
