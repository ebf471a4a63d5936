use sceneforge::demo::*;
use sceneforge::layout::{build_scene, BuildOptions};
use sceneforge::retrieval::{retrieve_scene_assets, RetrievalOptions};
use sceneforge::scene_model::{validate, Tolerances};

#[test]
fn living_room_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let report = living_room_library(dir.path()).unwrap();
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    assert_eq!(report.manifest.records.len(), 5);
    let provider = living_room_provider();
    let retrieval = retrieve_scene_assets(
        LIVING_ROOM_PROMPT,
        &report.manifest,
        &report.index,
        &provider,
        &RetrievalOptions::default(),
    )
    .unwrap();
    let names: Vec<String> = retrieval
        .decisions
        .iter()
        .map(|d| report.manifest.get(d.selected().unwrap()).unwrap().display_name.clone())
        .collect();
    assert_eq!(names, ["potted plant", "small table", "l shaped sofa"]);
    let out = build_scene(
        LIVING_ROOM_PROMPT,
        living_room_bounds(),
        &retrieval.decisions,
        &report.manifest,
        &provider,
        &BuildOptions::default(),
    )
    .unwrap();
    let doc = out.document;
    println!("{}", doc.to_json());
    let v = validate(&doc, &Tolerances::default());
    println!("{}", v.to_table());
    assert_eq!(v.violated, 0);
    assert_eq!(v.satisfied, 2);
    assert_eq!(v.non_benign_overlaps, 0);
}
