//! Extracts the objects a prompt needs, shortlists library assets and votes.
//!
//! cargo run --example retrieve_assets [WORK_DIR]

use sceneforge::demo::{living_room_library, living_room_provider, LIVING_ROOM_PROMPT};
use sceneforge::retrieval::{retrieve_scene_assets, RetrievalOptions};

fn main() {
    let work = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("sceneforge_retrieve"));
    let lib = living_room_library(&work).expect("ingest");
    let provider = living_room_provider();
    let report = retrieve_scene_assets(LIVING_ROOM_PROMPT, &lib.manifest, &lib.index, &provider, &RetrievalOptions::default())
        .expect("retrieval");
    for d in &report.decisions {
        println!("{} x{}", d.required.name, d.required.count);
        for c in &d.candidates {
            println!("    {:<14} {:.3}", c.display_name, c.score.unwrap_or(f64::NAN));
        }
        println!("  -> {:?}", d.outcome);
    }
}
