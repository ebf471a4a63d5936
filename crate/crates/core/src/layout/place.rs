use super::constraints::constraints_listing;
use super::{
    bounds_context, fmt_vec, placements_listing, AuditRecord, Constraint, LayoutError, Placement, PlacementFlag,
    SceneSpec, Slot, Stage,
};
use crate::geometry::{contains, Aabb, Vec3};
use crate::model_provider::{ParsedReply, Provider, ProviderError, ProviderReply, ProviderRequest, RequestKind};
use serde::Deserialize;
use serde_json::json;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Deserialize)]
pub(crate) struct PoseReply {
    pub position: [f64; 3],
    pub rotation: [f64; 3],
}

pub(crate) fn pose_check(parsed: &ParsedReply) -> Result<(), String> {
    let ParsedReply::Json(v) = parsed else {
        return Err("reply is not JSON".into());
    };
    let pose = PoseReply::deserialize(v).map_err(|e| e.to_string())?;
    if pose.position.iter().chain(&pose.rotation).all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err("position and rotation must be finite numbers".into())
    }
}

/// Moves `position` the least amount that puts the box of the given
/// extents inside `bounds`. Returns `false` when the box cannot fit along
/// some axis; it is then centered on that axis (floor-aligned vertically).
pub fn clamp_to_bounds(position: Vec3, extents: Vec3, bounds: &Aabb) -> (Vec3, bool) {
    let mut fits = true;
    let mut axis = |p: f64, lo: f64, hi: f64| {
        if lo > hi {
            fits = false;
            (lo + hi) / 2.0
        } else {
            p.clamp(lo, hi)
        }
    };
    let x = axis(position.x, bounds.min.x + extents.x / 2.0, bounds.max.x - extents.x / 2.0);
    let y = axis(position.y, bounds.min.y + extents.y / 2.0, bounds.max.y - extents.y / 2.0);
    let z = if bounds.min.z > bounds.max.z - extents.z {
        fits = false;
        bounds.min.z
    } else {
        position.z.clamp(bounds.min.z, bounds.max.z - extents.z)
    };
    (Vec3::new(x, y, z), fits)
}

fn in_bounds(p: &Placement, bounds: &Aabb, buffer: f64) -> bool {
    contains(&bounds.expanded(buffer), &p.aabb())
}

#[derive(Debug, Clone)]
pub struct PlaceStep {
    pub placement: Placement,
    pub audit: AuditRecord,
}

fn place_prompt(
    spec: &SceneSpec,
    constraints: &[Constraint],
    placed: &[Placement],
    slot: &Slot,
    provider: &Provider,
) -> Result<String, ProviderError> {
    let frame = provider.frame();
    let relevant: Vec<Constraint> = constraints
        .iter()
        .filter(|c| c.subject == slot.id || c.relation.anchor() == Some(slot.id.as_str()))
        .cloned()
        .collect();
    let mut ctx = BTreeMap::from([
        ("frame_description".to_string(), frame.description().to_string()),
        ("prompt".to_string(), spec.prompt.clone()),
        ("constraints".to_string(), constraints_listing(&relevant, frame)),
        ("placed_count".to_string(), placed.len().to_string()),
        ("placements".to_string(), placements_listing(placed, frame)),
        ("slot_id".to_string(), slot.id.clone()),
        ("name".to_string(), slot.display_name.clone()),
        ("size".to_string(), fmt_vec(frame.size_to_prompt(slot.size))),
    ]);
    ctx.extend(bounds_context(&spec.bounds, frame));
    Ok(provider.render_prompt("place", &ctx)?)
}

fn to_placement(reply: &ProviderReply, slot: &Slot, provider: &Provider) -> Result<Placement, LayoutError> {
    let pose: PoseReply = reply.json().map_err(|source| LayoutError::Placement {
        slot_id: slot.id.clone(),
        source,
    })?;
    let frame = provider.frame();
    Ok(Placement::new(
        slot,
        frame.point_from_prompt(pose.position),
        frame.rotation_from_prompt(pose.rotation),
    )?)
}

/// Places one slot given everything placed so far.
///
/// The reply's pose is converted to the scene frame and the rotated size is
/// recomputed locally. A pose outside the bounds (grown by `buffer`) gets
/// one repair round; if it is still outside, the position is clamped and
/// the placement flagged. Rotations are never altered.
#[allow(clippy::result_large_err)]
pub fn place_next(
    spec: &SceneSpec,
    constraints: &[Constraint],
    placed: &[Placement],
    slot: &Slot,
    provider: &Provider,
    buffer: f64,
) -> Result<PlaceStep, (LayoutError, AuditRecord)> {
    let prompt = place_prompt(spec, constraints, placed, slot, provider).map_err(|e| {
        let audit = AuditRecord::from_error(Stage::Place, Some(&slot.id), "", &e);
        (LayoutError::Placement { slot_id: slot.id.clone(), source: e }, audit)
    })?;
    let call = |prompt: &str| {
        ProviderRequest::new(RequestKind::Place, prompt.to_string(), vec![])
            .and_then(|r| provider.complete_checked(&r, pose_check))
    };
    let fail = |e: ProviderError, prompt: &str| {
        let audit = AuditRecord::from_error(Stage::Place, Some(&slot.id), prompt, &e);
        (
            LayoutError::Placement {
                slot_id: slot.id.clone(),
                source: e,
            },
            audit,
        )
    };
    let mut reply = call(&prompt).map_err(|e| fail(e, &prompt))?;
    let mut attempts = reply.attempts;
    let mut placement = to_placement(&reply, slot, provider).map_err(|e| {
        let audit = AuditRecord::from_reply(Stage::Place, Some(&slot.id), &reply, json!(null));
        (e, audit)
    })?;

    if !in_bounds(&placement, &spec.bounds, buffer) {
        let frame = provider.frame();
        let ctx = BTreeMap::from([
            ("original".to_string(), prompt.clone()),
            (
                "error".to_string(),
                format!(
                    "position {} with rotation {} puts [{}] (size after rotation {}) outside the scene bounds",
                    fmt_vec(frame.point_to_prompt(placement.position)),
                    fmt_vec(frame.rotation_to_prompt(placement.rotation)),
                    slot.id,
                    fmt_vec(frame.size_to_prompt(placement.rotated_size.0)),
                ),
            ),
            ("reply".to_string(), reply.text.clone()),
        ]);
        let retry = provider
            .render_prompt("repair", &ctx)
            .map_err(ProviderError::from)
            .and_then(|p| call(&p));
        match retry {
            Ok(r) => {
                attempts += r.attempts;
                if let Ok(p) = to_placement(&r, slot, provider) {
                    placement = p;
                    reply = r;
                }
            }
            Err(e) if e.is_transport() => return Err(fail(e, &prompt)),
            Err(e) => log::warn!("repair of out-of-bounds pose for {} failed: {e}", slot.id),
        }
    }
    if !in_bounds(&placement, &spec.bounds, buffer) {
        let (position, fits) = clamp_to_bounds(placement.position, placement.rotated_size.0, &spec.bounds);
        log::warn!("{} placed outside the bounds; clamped to {}", slot.id, position);
        placement = placement.moved(position, placement.rotation).map_err(|e| {
            let audit = AuditRecord::from_reply(Stage::Place, Some(&slot.id), &reply, json!(null));
            (LayoutError::from(e), audit)
        })?;
        placement.flags.insert(PlacementFlag::ClampedToBounds);
        if !fits {
            placement.flags.insert(PlacementFlag::ExceedsBounds);
        }
    }
    let mut audit = AuditRecord::from_reply(
        Stage::Place,
        Some(&slot.id),
        &reply,
        json!({
            "position": placement.position,
            "rotation": placement.rotation,
            "rotated_size": placement.rotated_size,
            "flags": placement.flags,
        }),
    );
    audit.prompt = prompt;
    audit.attempts = attempts;
    Ok(PlaceStep { placement, audit })
}

#[derive(Debug, Clone, Default)]
pub struct InitialPass {
    /// In placement order.
    pub placements: Vec<Placement>,
    /// `audit[i]` belongs to `order[i]`.
    pub audit: Vec<AuditRecord>,
}

/// Places the slots one by one in `order`, each seeing all earlier ones.
///
/// On failure the placements made so far come back with the error.
#[allow(clippy::result_large_err)]
pub fn initial_pass(
    spec: &SceneSpec,
    constraints: &[Constraint],
    order: &[String],
    provider: &Provider,
    buffer: f64,
) -> Result<InitialPass, (LayoutError, InitialPass)> {
    let mut pass = InitialPass::default();
    for id in order {
        let Some(slot) = spec.slot(id) else {
            return Err((LayoutError::Spec(format!("order names unknown slot {id}")), pass));
        };
        if pass.placements.iter().any(|p| &p.slot_id == id) {
            return Err((LayoutError::Spec(format!("order lists {id} twice")), pass));
        }
        match place_next(spec, constraints, &pass.placements, slot, provider, buffer) {
            Ok(step) => {
                pass.placements.push(step.placement);
                pass.audit.push(step.audit);
            }
            Err((e, audit)) => {
                pass.audit.push(audit);
                return Err((e, pass));
            }
        }
    }
    Ok(pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_provider::{FixtureEntry, ScriptedFixture};

    fn spec() -> SceneSpec {
        let slot = Slot {
            id: "desk_1".into(),
            asset_id: "a".into(),
            display_name: "desk".into(),
            size: Vec3::new(2.0, 3.0, 1.0),
        };
        SceneSpec::new("a desk", Aabb::room(5.0, 5.0, 3.0).unwrap(), vec![slot]).unwrap()
    }

    fn place(replies: &[&str]) -> PlaceStep {
        let p = Provider::scripted(ScriptedFixture::new(vec![FixtureEntry::new(
            RequestKind::Place,
            replies.iter().copied(),
        )]));
        let s = spec();
        place_next(&s, &[], &[], &s.slots[0], &p, 0.02).unwrap()
    }

    #[test]
    fn valid_first_placement() {
        let step = place(&[r#"{"position": [2.5, 2.5, 0], "rotation": [0, 0, 0]}"#]);
        assert_eq!(step.placement.position, Vec3::new(2.5, 2.5, 0.0));
        assert!(step.placement.flags.is_empty());
        assert!(contains(&Aabb::room(5.0, 5.0, 3.0).unwrap(), &step.placement.aabb()));
    }

    #[test]
    fn rotated_size_ignores_reply_claims() {
        let step = place(&[r#"{"position": [2.5, 2.5, 0], "rotation": [0, 0, 90], "size": [9, 9, 9]}"#]);
        assert_eq!(step.placement.rotated_size.0, Vec3::new(3.0, 2.0, 1.0));
    }

    #[test]
    fn out_of_bounds_is_repaired_once_then_clamped() {
        let step = place(&[
            r#"{"position": [9, 2.5, 0], "rotation": [0, 0, 0]}"#,
            r#"{"position": [8, 2.5, 0], "rotation": [0, 0, 0]}"#,
        ]);
        assert!(step.placement.flags.contains(&PlacementFlag::ClampedToBounds));
        assert_eq!(step.placement.position, Vec3::new(4.0, 2.5, 0.0));
        assert_eq!(step.audit.attempts, 2);

        let fixed = place(&[
            r#"{"position": [9, 2.5, 0], "rotation": [0, 0, 0]}"#,
            r#"{"position": [3, 2.5, 0], "rotation": [0, 0, 0]}"#,
        ]);
        assert!(fixed.placement.flags.is_empty());
        assert_eq!(fixed.placement.position.x, 3.0);
    }

    #[test]
    fn persistent_garbage_is_an_error() {
        let p = Provider::scripted(ScriptedFixture::new(vec![FixtureEntry::new(RequestKind::Place, ["nope"])]));
        let s = spec();
        let (err, audit) = place_next(&s, &[], &[], &s.slots[0], &p, 0.02).unwrap_err();
        assert!(matches!(err, LayoutError::Placement { .. }));
        assert_eq!(audit.attempts, 3);
    }

    #[test]
    fn clamp_keeps_fitting_boxes_inside() {
        let b = Aabb::room(5.0, 5.0, 3.0).unwrap();
        let (p, fits) = clamp_to_bounds(Vec3::new(-1.0, 6.0, -2.0), Vec3::new(1.0, 2.0, 1.0), &b);
        assert!(fits);
        assert_eq!(p, Vec3::new(0.5, 4.0, 0.0));
        let (_, fits) = clamp_to_bounds(Vec3::ZERO, Vec3::new(6.0, 1.0, 1.0), &b);
        assert!(!fits);
    }
}
