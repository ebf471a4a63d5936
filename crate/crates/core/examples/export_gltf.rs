//! Writes the built scene as a binary glTF file with one node per object.
//!
//! cargo run --example export_gltf [OUT_DIR]

use sceneforge::demo::{living_room_bounds, living_room_library, living_room_provider, LIVING_ROOM_PROMPT};
use sceneforge::layout::{build_scene, BuildOptions};
use sceneforge::retrieval::{retrieve_scene_assets, RetrievalOptions};
use sceneforge::scene_model::{export_gltf, gltf_node_transform};

fn main() {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("sceneforge_gltf"));
    let lib = living_room_library(&out).expect("ingest");
    let provider = living_room_provider();
    let retrieval = retrieve_scene_assets(LIVING_ROOM_PROMPT, &lib.manifest, &lib.index, &provider, &RetrievalOptions::default())
        .expect("retrieval");
    let doc = build_scene(LIVING_ROOM_PROMPT, living_room_bounds(), &retrieval.decisions, &lib.manifest, &provider, &BuildOptions::default())
        .expect("build")
        .document;

    for p in &doc.placements {
        let (t, q) = gltf_node_transform(p, lib.manifest.get(&p.asset_id).unwrap());
        println!("{:<16} translation {t:.3?} rotation {q:.3?}", p.slot_id);
    }
    let path = out.join("scene.glb");
    export_gltf(&doc, &lib.manifest, &path).expect("export");
    println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path).unwrap().len());
}
