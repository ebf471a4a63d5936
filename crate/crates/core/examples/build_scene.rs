//! Builds the living-room scene offline and writes scene.json plus the audit trail.
//!
//! cargo run --example build_scene [OUT_DIR]

use sceneforge::demo::{living_room_bounds, living_room_library, living_room_provider, LIVING_ROOM_PROMPT};
use sceneforge::layout::{audit_to_jsonl, build_scene, BuildOptions};
use sceneforge::retrieval::{retrieve_scene_assets, RetrievalOptions};

fn main() {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("sceneforge_build"));
    let lib = living_room_library(&out).expect("ingest");
    let provider = living_room_provider();
    let retrieval = retrieve_scene_assets(LIVING_ROOM_PROMPT, &lib.manifest, &lib.index, &provider, &RetrievalOptions::default())
        .expect("retrieval");
    let built = build_scene(
        LIVING_ROOM_PROMPT,
        living_room_bounds(),
        &retrieval.decisions,
        &lib.manifest,
        &provider,
        &BuildOptions::default(),
    )
    .expect("build");

    let doc = &built.document;
    for id in &doc.order {
        let p = doc.placement(id).unwrap();
        println!("{id:<16} at {}  yaw {:>6.1}  size after rotation {}", p.position, p.rotation.yaw(), p.rotated_size.size());
    }
    for v in &doc.verdicts {
        println!("refine {}: {:?}", v.slot_id, v.action);
    }
    doc.export_json(&out.join("scene.json")).unwrap();
    std::fs::write(out.join("scene.audit.jsonl"), audit_to_jsonl(&built.audit)).unwrap();
    println!("{} provider calls; wrote {}", built.audit.len(), out.join("scene.json").display());
}
