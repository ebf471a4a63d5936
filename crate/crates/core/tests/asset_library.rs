use proptest::prelude::*;
use sceneforge::asset_library::mesh::{load_mesh, native_to_scene, write_box_obj};
use sceneforge::asset_library::{
    caption_asset, infer_front_orientation, ingest, measure_asset, parse_caption, AssetFlag, IngestError,
    IngestOptions, LibraryManifest, QuarterTurn, MANIFEST_FILE,
};
use sceneforge::demo::{write_box_asset, DemoAsset, PLACEHOLDER_PNG};
use sceneforge::geometry::{size_after_rotation, Vec3};
use sceneforge::model_provider::{FixtureEntry, Provider, RequestKind, ScriptedFixture};
use std::path::{Path, PathBuf};

fn views(dir: &Path, names: &[&str]) -> Vec<PathBuf> {
    names
        .iter()
        .map(|n| {
            let p = dir.join(format!("{n}.png"));
            std::fs::write(&p, PLACEHOLDER_PNG).unwrap();
            p
        })
        .collect()
}

fn scripted(kind: RequestKind, reply: &str) -> Provider {
    Provider::scripted(ScriptedFixture::new(vec![FixtureEntry::new(kind, [reply])]))
}

/// Replies a model might give when asked for the front view, labelled by hand.
const PHRASINGS: [(&str, Option<usize>); 20] = [
    ("3", Some(3)),
    ("1", Some(1)),
    ("front is image two", Some(2)),
    ("Image 4.", Some(4)),
    ("The front-facing view is image #3.", Some(3)),
    ("View 2", Some(2)),
    ("**2**", Some(2)),
    ("The second image shows the front.", Some(2)),
    ("I believe the third view faces the camera.", Some(3)),
    ("Answer: 4", Some(4)),
    ("image three", Some(3)),
    ("The first image.", Some(1)),
    ("Picture 1 shows the front of the chair.", Some(1)),
    ("4)", Some(4)),
    ("It's image number 2.", Some(2)),
    ("The seat faces the viewer in image 3, so that is the front.", Some(3)),
    ("The answer is two.", Some(2)),
    ("either 1 or 2", None),
    ("I cannot tell from these renders.", None),
    ("image 7", None),
];

#[test]
fn orientation_phrasings_match_labels() {
    let dir = tempfile::tempdir().unwrap();
    let v: [PathBuf; 4] = views(dir.path(), &["0", "90", "180", "270"]).try_into().unwrap();
    for (reply, label) in PHRASINGS {
        let got = infer_front_orientation(&v, "chair", &scripted(RequestKind::Orient, reply));
        match label {
            Some(i) => assert_eq!(
                got.as_ref().map(|q| q.degrees()).ok(),
                Some(((i - 1) * 90) as u16),
                "{reply:?} -> {got:?}"
            ),
            None => assert!(matches!(got, Err(IngestError::OrientationUnresolved { .. })), "{reply:?} -> {got:?}"),
        }
    }
}

/// Real-style captioning replies. The physical section always mentions
/// walnut, the functional one storage, the contextual one a bedroom.
const CAPTIONS: [&str; 10] = [
    "(1) Physical properties: a walnut chest of drawers with brass pulls\n(2) Functional properties: storage for folded clothes\n(3) Contextual properties: a bedroom or a guest room",
    "(3) Contextual properties: found in a bedroom\n(1) Physical properties: walnut veneer, four drawers\n(2) Functional properties: storage of linen",
    "### Physical Properties\nA low walnut cabinet.\n\n### Functional Properties\nOffers storage behind two doors.\n\n### Contextual Properties\nSits in a bedroom beside the bed.",
    "1. Physical properties: walnut frame, 80 cm tall\n2. Functional properties: storage for shoes\n3. Contextual properties: an entry hall or bedroom",
    "**Physical properties:** solid walnut with a matte finish\n\n**Functional properties:** storage and display\n\n**Contextual properties:** a bedroom corner",
    "Here is a structured description of the object.\n\n(1) Physical properties: walnut top, black steel legs\n(2) Functional properties: storage shelf under the top\n(3) Contextual properties: bedroom or study",
    "Contextual: a bedroom in a modern flat\nPhysical: a slim walnut dresser\nFunctional: storage for accessories",
    "(1) Functional properties: storage for blankets\n(2) Physical properties: a walnut trunk with leather straps\n(3) Contextual properties: the foot of a bedroom bed",
    "(1) Physical properties:\n- walnut body\n- rounded corners\n(2) Functional properties:\n- storage for toys\n(3) Contextual properties:\n- a child's bedroom",
    "(1) Physical properties: small, walnut. (2) Functional properties: storage. (3) Contextual properties: bedroom.",
];

#[test]
fn caption_sections_assigned_by_header() {
    for (i, reply) in CAPTIONS.iter().enumerate() {
        let c = parse_caption(reply).unwrap_or_else(|e| panic!("reply {i}: {e}"));
        let sections = [("walnut", &c.physical), ("storage", &c.functional), ("bedroom", &c.contextual)];
        for (j, (word, text)) in sections.iter().enumerate() {
            let lower = text.to_lowercase();
            assert!(lower.contains(word), "reply {i}: section {j} is {text:?}");
            for (k, (other, _)) in sections.iter().enumerate() {
                assert!(k == j || !lower.contains(other), "reply {i}: section {j} leaks {other:?}: {text:?}");
            }
        }
    }
}

#[test]
fn missing_section_reports_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let v: [PathBuf; 2] = views(dir.path(), &["a", "b"]).try_into().unwrap();
    let reply = "(1) Physical properties: oak\n(2) Functional properties: sitting";
    match caption_asset(&v, "chair", &scripted(RequestKind::Caption, reply)) {
        Err(IngestError::CaptionIncomplete { missing, partial }) => {
            assert_eq!(missing, vec!["contextual"]);
            assert_eq!(partial.physical, "oak");
        }
        other => panic!("{other:?}"),
    }
}

fn asset(stem: &'static str, size: Vec3) -> DemoAsset {
    DemoAsset { stem, size }
}

#[test]
fn ingest_collects_failures_and_keeps_ids() {
    let dir = tempfile::tempdir().unwrap();
    let assets = dir.path().join("assets");
    for (stem, w) in [("desk", 1.2), ("stool", 0.4), ("shelf", 0.9)] {
        write_box_asset(&assets, &asset(stem, Vec3::new(w, 0.5, 0.7))).unwrap();
    }
    std::fs::write(assets.join("broken.obj"), "v 0 0 0\nf 1 2 3\n").unwrap();
    let library = dir.path().join("library");
    let provider = Provider::scripted(ScriptedFixture::default());

    let first = ingest(&assets, &library, &provider, &IngestOptions::default()).unwrap();
    assert_eq!(first.manifest.records.len(), 3);
    assert_eq!(first.errors.len(), 1);
    assert!(first.errors[0].to_string().contains("broken.obj"), "{}", first.errors[0]);

    let second = ingest(&assets, &library, &provider, &IngestOptions::default()).unwrap();
    assert_eq!(second.manifest.version, first.manifest.version + 1);
    let ids = |m: &LibraryManifest| m.records.iter().map(|r| (r.id.clone(), r.size)).collect::<Vec<_>>();
    assert_eq!(ids(&first.manifest), ids(&second.manifest));

    let text = std::fs::read_to_string(library.join(MANIFEST_FILE)).unwrap();
    let reloaded = LibraryManifest::from_jsonl(&text, &library).unwrap();
    assert_eq!(reloaded, second.manifest);
    assert_eq!(reloaded.to_jsonl(), text);
}

#[test]
fn skip_orientation_and_unresolved_orientation() {
    let dir = tempfile::tempdir().unwrap();
    let assets = dir.path().join("assets");
    write_box_asset(&assets, &asset("crate", Vec3::new(0.6, 0.4, 0.4))).unwrap();
    let never = scripted(RequestKind::Orient, "no idea at all");

    let skipped = ingest(
        &assets,
        &dir.path().join("a"),
        &never,
        &IngestOptions {
            skip_orientation: true,
            ..Default::default()
        },
    )
    .unwrap();
    let r = &skipped.manifest.records[0];
    assert_eq!(r.front_yaw_offset.degrees(), 0);
    assert!(r.has_flag(AssetFlag::OrientationSkipped));

    let unresolved = ingest(&assets, &dir.path().join("b"), &never, &IngestOptions::default()).unwrap();
    let r = &unresolved.manifest.records[0];
    assert_eq!(r.front_yaw_offset.degrees(), 0);
    assert!(r.has_flag(AssetFlag::OrientationUnresolved));
    assert_eq!(unresolved.warnings.len(), 1);
}

/// Extents of the mesh after turning it by its front offset, measured
/// from the vertices themselves.
fn remeasure(mesh_path: &Path, offset: QuarterTurn) -> Vec3 {
    let mesh = load_mesh(mesh_path).unwrap();
    let m = offset.rotation().matrix();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &mesh.positions {
        let s = native_to_scene(Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64));
        let r = m * nalgebra::Vector3::new(s.x, s.y, s.z);
        for i in 0..3 {
            lo[i] = lo[i].min(r[i]);
            hi[i] = hi[i].max(r[i]);
        }
    }
    Vec3::new(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2])
}

fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
    (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol && (a.z - b.z).abs() <= tol
}

#[test]
fn remeasure_after_front_offset_matches_rotated_size() {
    let dir = tempfile::tempdir().unwrap();
    let assets = dir.path().join("assets");
    let mut entries = Vec::new();
    for (i, stem) in ["bench", "cabinet", "dresser", "wardrobe"].into_iter().enumerate() {
        write_box_asset(&assets, &asset(stem, Vec3::new(2.0 + i as f64 * 0.1, 0.6, 0.9))).unwrap();
        entries.push(FixtureEntry::new(RequestKind::Orient, [(i + 1).to_string()]).matching(format!("\"{stem}\"")));
    }
    let provider = Provider::scripted(ScriptedFixture::new(entries));
    let report = ingest(&assets, &dir.path().join("library"), &provider, &IngestOptions::default()).unwrap();
    let mut offsets: Vec<u16> = Vec::new();
    for r in &report.manifest.records {
        offsets.push(r.front_yaw_offset.degrees());
        let want = size_after_rotation(r.size, r.front_yaw_offset.rotation()).unwrap().size();
        let got = remeasure(&r.mesh_path, r.front_yaw_offset);
        assert!(close(got, want, 1e-6), "{}: {got} vs {want}", r.display_name);
        assert!(close(r.canonical_size(), want, 0.0));
    }
    assert_eq!(offsets, vec![0, 90, 180, 270]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn box_measures_its_size_under_every_turn(
        w in 0.05f64..4.0, d in 0.05f64..4.0, h in 0.05f64..4.0, turn in 0usize..4
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("box.obj");
        // Native frame is Y-up: height goes on the second axis.
        write_box_obj(&path, Vec3::new(w, h, d)).unwrap();
        let native = measure_asset(&path).unwrap();
        prop_assert!(close(native, Vec3::new(w, h, d), 1e-6));
        let offset = QuarterTurn::ALL[turn];
        let want = size_after_rotation(Vec3::new(w, d, h), offset.rotation()).unwrap().size();
        prop_assert!(close(remeasure(&path, offset), want, 1e-6));
    }
}
