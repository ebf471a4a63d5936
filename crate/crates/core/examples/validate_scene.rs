//! Checks constraints against geometry, before and after refinement.
//!
//! cargo run --example validate_scene

use sceneforge::demo::{living_room_bounds, living_room_library, living_room_provider, LIVING_ROOM_PROMPT};
use sceneforge::layout::{build_scene, BuildOptions};
use sceneforge::retrieval::{retrieve_scene_assets, RetrievalOptions};
use sceneforge::scene_model::{validate, Tolerances};

fn main() {
    let work = std::env::temp_dir().join("sceneforge_validate");
    let lib = living_room_library(&work).expect("ingest");
    for skip_refinement in [true, false] {
        let provider = living_room_provider();
        let retrieval =
            retrieve_scene_assets(LIVING_ROOM_PROMPT, &lib.manifest, &lib.index, &provider, &RetrievalOptions::default())
                .expect("retrieval");
        let options = BuildOptions {
            skip_refinement,
            ..Default::default()
        };
        let doc = build_scene(LIVING_ROOM_PROMPT, living_room_bounds(), &retrieval.decisions, &lib.manifest, &provider, &options)
            .expect("build")
            .document;
        println!("{}", if skip_refinement { "initial placement:" } else { "after refinement:" });
        print!("{}", validate(&doc, &Tolerances::default()).to_table());
        println!();
    }
}
