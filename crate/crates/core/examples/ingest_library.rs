//! Ingests five box assets with the scripted provider and prints the records.
//!
//! cargo run --example ingest_library [WORK_DIR]

use sceneforge::demo::living_room_library;

fn main() {
    let work = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("sceneforge_ingest"));
    let report = living_room_library(&work).expect("ingest");
    for r in &report.manifest.records {
        println!(
            "{}  {:<14} size {}  front +{:>3}  {}",
            &r.id[..12],
            r.display_name,
            r.size,
            r.front_yaw_offset.degrees(),
            r.caption.physical
        );
    }
    println!("manifest v{} in {}", report.manifest.version, work.join("library").display());
    for e in &report.errors {
        println!("error: {e}");
    }
}
