use super::{CollisionReport, SceneDocument};
use crate::geometry::{normalize_degrees, Aabb, DEFAULT_COLLISION_BUFFER};
use crate::layout::{Constraint, Placement, Relation};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Thresholds for the geometric checks. Angles in degrees, lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed gap or sink between a supported object and its support.
    pub vertical: f64,
    /// Largest horizontal gap that still counts as adjacent.
    pub adjacent_gap: f64,
    pub facing_deg: f64,
    pub aligned_deg: f64,
    pub pose_position: f64,
    pub pose_angle_deg: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            vertical: DEFAULT_COLLISION_BUFFER,
            adjacent_gap: 0.25,
            facing_deg: 30.0,
            aligned_deg: 5.0,
            pose_position: 0.1,
            pose_angle_deg: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Satisfied { measure: f64 },
    Violated { measure: f64 },
    Unverifiable { reason: String },
}

impl Status {
    fn judged(ok: bool, measure: f64) -> Self {
        if ok {
            Status::Satisfied { measure }
        } else {
            Status::Violated { measure }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Status::Satisfied { .. } => "satisfied",
            Status::Violated { .. } => "violated",
            Status::Unverifiable { .. } => "unverifiable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub subject: String,
    pub relation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    #[serde(flatten)]
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// One entry per constraint, in document order.
    pub checks: Vec<ConstraintCheck>,
    pub satisfied: usize,
    pub violated: usize,
    pub unverifiable: usize,
    pub non_benign_overlaps: usize,
    pub out_of_bounds: Vec<String>,
}

impl ValidationReport {
    /// Fixed-width text table followed by a summary line.
    pub fn to_table(&self) -> String {
        let w_subj = self.checks.iter().map(|c| c.subject.len()).max().unwrap_or(0).max(7);
        let w_rel = self.checks.iter().map(|c| c.relation.len()).max().unwrap_or(0).max(8);
        let w_anc = self
            .checks
            .iter()
            .map(|c| c.anchor.as_deref().unwrap_or("-").len())
            .max()
            .unwrap_or(0)
            .max(6);
        let mut out = format!(
            "{:<w_subj$}  {:<w_rel$}  {:<w_anc$}  {:<12}  detail\n",
            "subject", "relation", "anchor", "status"
        );
        for c in &self.checks {
            let detail = match &c.status {
                Status::Satisfied { measure } | Status::Violated { measure } => format!("{measure:.4}"),
                Status::Unverifiable { reason } => reason.clone(),
            };
            out.push_str(&format!(
                "{:<w_subj$}  {:<w_rel$}  {:<w_anc$}  {:<12}  {detail}\n",
                c.subject,
                c.relation,
                c.anchor.as_deref().unwrap_or("-"),
                c.status.label()
            ));
        }
        out.push_str(&format!(
            "{} satisfied, {} violated, {} unverifiable; {} non-benign overlaps; {} out of bounds\n",
            self.satisfied,
            self.violated,
            self.unverifiable,
            self.non_benign_overlaps,
            self.out_of_bounds.len()
        ));
        out
    }
}

fn interval_overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    a1.min(b1) - a0.max(b0)
}

fn horizontal_gap(a: &Aabb, b: &Aabb) -> f64 {
    let gx = (a.min.x - b.max.x).max(b.min.x - a.max.x);
    let gy = (a.min.y - b.max.y).max(b.min.y - a.max.y);
    gx.max(gy).max(0.0)
}

fn check(c: &Constraint, doc: &SceneDocument, tol: &Tolerances) -> Status {
    let unverifiable = |reason: String| Status::Unverifiable { reason };
    let Some(subject) = doc.placement(&c.subject) else {
        return unverifiable(format!("{} is not placed", c.subject));
    };
    let anchor: Option<&Placement> = match c.relation.anchor() {
        Some(id) => match doc.placement(id) {
            Some(p) => Some(p),
            None => return unverifiable(format!("{id} is not placed")),
        },
        None => None,
    };
    let s = subject.aabb();
    let cs = s.center();
    match (&c.relation, anchor) {
        (Relation::OnTopOf { .. }, Some(a)) => {
            let b = a.aabb();
            let dz = s.min.z - b.max.z;
            let fx = interval_overlap(s.min.x, s.max.x, b.min.x, b.max.x);
            let fy = interval_overlap(s.min.y, s.max.y, b.min.y, b.max.y);
            Status::judged(dz.abs() <= tol.vertical && fx > 0.0 && fy > 0.0, dz)
        }
        (Relation::InFrontOf { .. } | Relation::Behind { .. }, Some(a)) => {
            let d = (cs - a.aabb().center()).dot(&a.rotation.forward());
            let d = if matches!(c.relation, Relation::Behind { .. }) { -d } else { d };
            Status::judged(d > 0.0, d)
        }
        (Relation::RightOf { .. } | Relation::LeftOf { .. }, Some(a)) => {
            let d = (cs - a.aabb().center()).dot(&a.rotation.right());
            let d = if matches!(c.relation, Relation::LeftOf { .. }) { -d } else { d };
            Status::judged(d > 0.0, d)
        }
        (Relation::AdjacentTo { .. }, Some(a)) => {
            let gap = horizontal_gap(&s, &a.aabb());
            Status::judged(gap <= tol.adjacent_gap, gap)
        }
        (Relation::Facing { .. }, Some(a)) => {
            let d = a.aabb().center() - cs;
            if d.x.hypot(d.y) < 1e-9 {
                return unverifiable("objects share a vertical axis".into());
            }
            let toward = d.x.atan2(-d.y).to_degrees();
            let off = normalize_degrees(subject.rotation.yaw() - toward).abs();
            Status::judged(off <= tol.facing_deg, off)
        }
        (Relation::AlignedWith { .. }, Some(a)) => {
            let r = (subject.rotation.yaw() - a.rotation.yaw()).rem_euclid(90.0);
            let off = r.min(90.0 - r);
            Status::judged(off <= tol.aligned_deg, off)
        }
        (Relation::Distance { min, max, .. }, Some(a)) => {
            let d = (cs - a.aabb().center()).norm();
            Status::judged(d >= *min && d <= *max, d)
        }
        (Relation::WithinRegion { region }, _) => {
            let protrusion = [
                region.min.x - s.min.x,
                region.min.y - s.min.y,
                region.min.z - s.min.z,
                s.max.x - region.max.x,
                s.max.y - region.max.y,
                s.max.z - region.max.z,
            ]
            .into_iter()
            .fold(0.0, f64::max);
            Status::judged(protrusion <= 1e-9, protrusion)
        }
        (Relation::Pose { position, rotation }, _) => {
            let d = (subject.position - *position).norm();
            let angle_ok = rotation.is_none_or(|r| {
                [
                    (subject.rotation.yaw(), r.yaw()),
                    (subject.rotation.pitch(), r.pitch()),
                    (subject.rotation.roll(), r.roll()),
                ]
                .iter()
                .all(|(x, y)| normalize_degrees(x - y).abs() <= tol.pose_angle_deg)
            });
            Status::judged(d <= tol.pose_position && angle_ok, d)
        }
        (Relation::Unknown { name, .. }, _) => unverifiable(format!("unknown relation {name:?}")),
        (_, None) => unverifiable("relation has no anchor".into()),
    }
}

/// Checks every constraint against the placed geometry. Pure: the result
/// depends only on the document and the tolerances.
pub fn validate(doc: &SceneDocument, tol: &Tolerances) -> ValidationReport {
    let checks: Vec<ConstraintCheck> = doc
        .constraints
        .iter()
        .map(|c| ConstraintCheck {
            subject: c.subject.clone(),
            relation: c.relation.name().to_string(),
            anchor: c.relation.anchor().map(str::to_string),
            status: check(c, doc, tol),
        })
        .collect();
    let count = |label| checks.iter().filter(|c| c.status.label() == label).count();
    let benign: BTreeSet<(String, String)> = doc
        .collision_report
        .benign
        .iter()
        .map(|[a, b]| (a.clone(), b.clone()))
        .collect();
    let recomputed = CollisionReport::compute(&doc.placements, doc.collision_report.buffer, &benign);
    let room = doc.bounds.expanded(1e-9);
    ValidationReport {
        satisfied: count("satisfied"),
        violated: count("violated"),
        unverifiable: count("unverifiable"),
        non_benign_overlaps: recomputed.non_benign().count(),
        out_of_bounds: doc
            .placements
            .iter()
            .filter(|p| !crate::geometry::contains(&room, &p.aabb()))
            .map(|p| p.slot_id.clone())
            .collect(),
        checks,
    }
}
