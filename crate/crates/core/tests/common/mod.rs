#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sceneforge::geometry::{Aabb, EulerRotation, Vec3};
use sceneforge::layout::{
    BuildOptions, Constraint, ConstraintSource, Placement, RefinementVerdict, Relation, SceneSpec, Slot, VerdictAction,
};
use sceneforge::asset_library::{ingest, IngestOptions, IngestReport};
use sceneforge::demo::{write_box_asset, DemoAsset};
use sceneforge::model_provider::{FixtureEntry, Provider, RequestKind, ScriptedFixture, UsageCounters};
use sceneforge::scene_model::{SceneDocument, SceneMeta};
use std::collections::BTreeSet;
use std::path::Path;

pub fn slot(id: &str, size: Vec3) -> Slot {
    Slot {
        id: id.to_string(),
        asset_id: format!("asset_{id}"),
        display_name: id.replace('_', " "),
        size,
    }
}

pub fn meta() -> SceneMeta {
    let provider = Provider::scripted(ScriptedFixture::default());
    SceneMeta::new(&provider, &BuildOptions::default(), UsageCounters::default(), vec![])
}

/// A document from hand-given poses, no verdicts.
pub fn document(bounds: Aabb, poses: &[(Slot, Vec3, EulerRotation)], constraints: Vec<Constraint>) -> SceneDocument {
    let slots: Vec<Slot> = poses.iter().map(|(s, _, _)| s.clone()).collect();
    let spec = SceneSpec::new("test scene", bounds, slots).unwrap();
    let placements = poses.iter().map(|(s, p, r)| Placement::new(s, *p, *r).unwrap()).collect();
    let order = spec.slots.iter().map(|s| s.id.clone()).collect();
    SceneDocument::assemble(&spec, placements, constraints, order, vec![], BTreeSet::new(), vec![], meta())
}

fn angle(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..3) {
        0 => 0.0,
        1 => [90.0, -90.0, -180.0][rng.gen_range(0..3)],
        _ => rng.gen_range(-180.0..180.0),
    }
}

fn rotation(rng: &mut ChaCha8Rng) -> EulerRotation {
    if rng.gen_bool(0.7) {
        EulerRotation::from_yaw(angle(rng))
    } else {
        EulerRotation::new(angle(rng), angle(rng), angle(rng))
    }
}

fn text(rng: &mut ChaCha8Rng) -> String {
    const WORDS: [&str; 8] = ["chair", "\"quoted\"", "naïve", "tab\there", "line\nbreak", "1e-9", "😀", "back\\slash"];
    (0..rng.gen_range(0..4)).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// A random but internally consistent scene document.
pub fn random_document(rng: &mut ChaCha8Rng) -> SceneDocument {
    let bounds = Aabb::room(rng.gen_range(2.0..10.0), rng.gen_range(2.0..10.0), rng.gen_range(2.0..4.0)).unwrap();
    let n = rng.gen_range(0..8);
    let slots: Vec<Slot> = (0..n)
        .map(|i| {
            slot(
                &format!("obj_{i}"),
                Vec3::new(rng.gen_range(0.05..2.0), rng.gen_range(0.05..2.0), rng.gen_range(0.05..2.0)),
            )
        })
        .collect();
    let spec = SceneSpec::new(text(rng), bounds, slots.clone()).unwrap();
    let mut placements: Vec<Placement> = slots
        .iter()
        .map(|s| {
            let p = Vec3::new(
                rng.gen_range(-1.0..bounds.max.x + 1.0),
                rng.gen_range(-1.0..bounds.max.y + 1.0),
                if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..2.0) },
            );
            Placement::new(s, p, rotation(rng)).unwrap()
        })
        .collect();
    for p in placements.iter_mut() {
        if rng.gen_bool(0.2) {
            p.flags.insert(sceneforge::layout::PlacementFlag::ClampedToBounds);
        }
    }
    let ids: Vec<String> = slots.iter().map(|s| s.id.clone()).collect();
    let mut constraints = Vec::new();
    if n >= 2 {
        for _ in 0..rng.gen_range(0..6) {
            let s = ids.choose(rng).unwrap().clone();
            let a = ids.choose(rng).unwrap().clone();
            let relation = match rng.gen_range(0..12) {
                0 => Relation::OnTopOf { anchor: a },
                1 => Relation::InFrontOf { anchor: a },
                2 => Relation::Behind { anchor: a },
                3 => Relation::LeftOf { anchor: a },
                4 => Relation::RightOf { anchor: a },
                5 => Relation::AdjacentTo { anchor: a },
                6 => Relation::Facing { anchor: a },
                7 => Relation::AlignedWith { anchor: a },
                8 => Relation::Distance {
                    anchor: a,
                    min: rng.gen_range(0.0..1.0),
                    max: rng.gen_range(1.0..5.0),
                },
                9 => Relation::WithinRegion {
                    region: Aabb::new(Vec3::ZERO, Vec3::new(rng.gen_range(0.5..3.0), 2.0, 3.0)).unwrap(),
                },
                10 => Relation::Pose {
                    position: Vec3::new(rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0), 0.0),
                    rotation: rng.gen_bool(0.5).then(|| rotation(rng)),
                },
                _ => Relation::Unknown {
                    name: "under".into(),
                    anchor: rng.gen_bool(0.5).then_some(a),
                },
            };
            let source = if rng.gen_bool(0.5) { ConstraintSource::Explicit } else { ConstraintSource::Inferred };
            constraints.push(Constraint::new(s, relation, source));
        }
    }
    let mut verdicts = Vec::new();
    let mut benign = BTreeSet::new();
    let overlaps = sceneforge::geometry::detect_collisions(
        &placements.iter().map(|p| (p.slot_id.clone(), p.aabb())).collect::<Vec<_>>(),
        0.02,
    )
    .unwrap();
    for o in &overlaps {
        if rng.gen_bool(0.5) {
            benign.insert((o.a_id.clone(), o.b_id.clone()));
            verdicts.push(RefinementVerdict {
                slot_id: o.a_id.clone(),
                sweep: 1,
                action: VerdictAction::Keep {
                    benign_with: vec![o.b_id.clone()],
                },
                rationale: text(rng),
                degraded: false,
                note: None,
            });
        } else {
            let p = &placements.iter().find(|p| p.slot_id == o.a_id).unwrap();
            verdicts.push(RefinementVerdict {
                slot_id: o.a_id.clone(),
                sweep: rng.gen_range(1..4),
                action: VerdictAction::Move {
                    position: p.position,
                    rotation: p.rotation,
                },
                rationale: text(rng),
                degraded: rng.gen_bool(0.2),
                note: rng.gen_bool(0.3).then(|| text(rng)),
            });
        }
    }
    let mut order = ids.clone();
    order.shuffle(rng);
    let warnings = (0..rng.gen_range(0..3)).map(|_| text(rng)).collect();
    SceneDocument::assemble(&spec, placements, constraints, order, verdicts, benign, warnings, meta())
}

const COLORS: [&str; 10] = ["red", "blue", "green", "black", "white", "grey", "yellow", "brown", "orange", "purple"];
const MATERIALS: [&str; 5] = ["oak", "steel", "plastic", "wicker", "glass"];
const THINGS: [(&str, &str, &str); 10] = [
    ("chair", "seats one person", "dining rooms and offices"),
    ("lamp", "gives light for reading", "bedsides and desks"),
    ("shelf", "stores books and ornaments", "studies and libraries"),
    ("table", "holds plates and cups", "kitchens and cafes"),
    ("stool", "gives a perch at a counter", "bars and workshops"),
    ("bin", "collects waste paper", "offices and kitchens"),
    ("cabinet", "keeps files out of sight", "offices and hallways"),
    ("bench", "seats people in a row", "parks and entrances"),
    ("mirror", "reflects the room", "bathrooms and dressing rooms"),
    ("crate", "carries produce", "markets and storerooms"),
];

pub fn synthetic_caption(i: usize) -> (String, String) {
    let color = COLORS[i % 10];
    let material = MATERIALS[(i / 10) % 5];
    let (thing, use_, place) = THINGS[(i * 7 + i / 10) % 10];
    let reply = format!(
        "(1) Physical properties: a {color} {material} {thing} with a {} finish\n(2) Functional properties: {use_}\n(3) Contextual properties: found in {place}",
        ["matte", "gloss", "satin", "rough", "polished"][i % 5]
    );
    (format!("asset {i:02}"), reply)
}

/// `n` distinct box assets captioned from [`synthetic_caption`], ingested
/// into `<dir>/library`. The provider replays the captions.
pub fn synthetic_library(dir: &Path, n: usize) -> (IngestReport, Provider) {
    let mut entries = Vec::new();
    for i in 0..n {
        let stem: &'static str = Box::leak(format!("asset_{i:02}").into_boxed_str());
        let asset = DemoAsset {
            stem,
            size: Vec3::new(0.5 + i as f64 * 0.01, 0.5, 0.5),
        };
        write_box_asset(&dir.join("assets"), &asset).unwrap();
        let (name, reply) = synthetic_caption(i);
        entries.push(FixtureEntry::new(RequestKind::Caption, [reply]).matching(format!("hint, if it is helpful: {name}.")));
    }
    let provider = Provider::scripted(ScriptedFixture::new(entries));
    let report = ingest(&dir.join("assets"), &dir.join("library"), &provider, &IngestOptions::default()).unwrap();
    (report, provider)
}
