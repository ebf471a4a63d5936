mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sceneforge::asset_library::AssetRecord;
use sceneforge::embedding_store::{embed_caption, EmbeddingVector, VectorIndex};
use sceneforge::geometry::Aabb;
use sceneforge::layout::SceneSpec;
use sceneforge::model_provider::{FixtureEntry, Provider, RequestKind, ScriptedFixture};
use sceneforge::retrieval::{retrieve_scene_assets, shortlist, Outcome, RequiredObject, RetrievalOptions};

/// Full descending sort by an independently computed cosine, ties on id.
fn sorted_by_cosine(index: &VectorIndex, query: &[f32]) -> Vec<(String, f64)> {
    let norm = |v: &[f32]| v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    let mut all: Vec<(String, f64)> = index
        .iter()
        .map(|(id, v)| {
            let dot: f64 = v.values().iter().zip(query).map(|(a, b)| *a as f64 * *b as f64).sum();
            (id.to_string(), dot / (norm(v.values()) * norm(query)))
        })
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all
}

fn required_for(record: &AssetRecord) -> RequiredObject {
    RequiredObject {
        name: record.display_name.clone(),
        count: 1,
        description: record.caption.clone(),
    }
}

#[test]
fn shortlist_matches_full_sort_on_synthetic_library() {
    let dir = tempfile::tempdir().unwrap();
    let (report, provider) = common::synthetic_library(dir.path(), 50);
    for record in &report.manifest.records {
        let got = shortlist(&required_for(record), &report.manifest, &report.index, &provider, 5).unwrap();
        let query = embed_caption(&record.caption, &provider).unwrap();
        let want = sorted_by_cosine(&report.index, query.values());
        assert_eq!(got[0].asset_id, record.id);
        assert!((got[0].score.unwrap() - 1.0).abs() < 1e-6);
        let got_ids: Vec<&str> = got.iter().map(|c| c.asset_id.as_str()).collect();
        let want_ids: Vec<&str> = want.iter().take(5).map(|(id, _)| id.as_str()).collect();
        assert_eq!(got_ids, want_ids);
        for (c, (_, s)) in got.iter().zip(&want) {
            assert!((c.score.unwrap() - s).abs() < 1e-9);
        }
    }
}

fn objects_reply(objects: &[(String, u32, &AssetRecord)]) -> String {
    let list: Vec<serde_json::Value> = objects
        .iter()
        .map(|(name, count, r)| serde_json::json!({"name": name, "count": count, "description": r.caption}))
        .collect();
    format!("```json\n{}\n```", serde_json::json!({ "objects": list }))
}

#[test]
fn twelve_self_descriptions_all_selected_top1() {
    let dir = tempfile::tempdir().unwrap();
    let (report, _) = common::synthetic_library(dir.path(), 30);
    let picks: Vec<&AssetRecord> = report.manifest.records.iter().step_by(2).take(12).collect();
    let objects: Vec<(String, u32, &AssetRecord)> = picks.iter().map(|r| (r.display_name.clone(), 1, *r)).collect();
    let provider = Provider::scripted(ScriptedFixture::new(vec![
        FixtureEntry::new(RequestKind::ExtractObjects, [objects_reply(&objects)]),
        FixtureEntry::new(RequestKind::Vote, ["1"]),
    ]));
    let out = retrieve_scene_assets("a showroom", &report.manifest, &report.index, &provider, &RetrievalOptions::default())
        .unwrap();
    assert_eq!(out.decisions.len(), 12);
    for (d, r) in out.decisions.iter().zip(&picks) {
        assert_eq!(d.selected(), Some(r.id.as_str()));
        assert_eq!(d.candidates[0].asset_id, r.id);
    }
}

#[test]
fn missing_object_voted_out_and_counts_share_an_asset() {
    let dir = tempfile::tempdir().unwrap();
    let (report, _) = common::synthetic_library(dir.path(), 12);
    let r = &report.manifest.records;
    let mut objects: Vec<(String, u32, &AssetRecord)> = (0..11).map(|i| (r[i].display_name.clone(), 1, &r[i])).collect();
    objects[0].1 = 4;
    // No sofa in the library; the closest caption comes back but is voted down.
    objects.push(("sofa".into(), 1, &r[11]));
    let mut votes = vec!["1"; 11];
    votes.push("none of these is a sofa");
    let provider = Provider::scripted(ScriptedFixture::new(vec![
        FixtureEntry::new(RequestKind::ExtractObjects, [objects_reply(&objects)]),
        FixtureEntry::new(RequestKind::Vote, votes),
    ]));
    let out = retrieve_scene_assets("a room", &report.manifest, &report.index, &provider, &RetrievalOptions::default())
        .unwrap();
    let selected = out.decisions.iter().filter(|d| d.selected().is_some()).count();
    assert_eq!(selected, 11);
    assert_eq!(out.decisions[11].outcome, Outcome::NoMatch);
    assert!(out.warnings.iter().any(|w| w.starts_with("sofa")));

    let bounds = Aabb::room(5.0, 5.0, 3.0).unwrap();
    let (spec, _) = SceneSpec::from_decisions("a room", bounds, &out.decisions, &report.manifest).unwrap();
    assert_eq!(spec.slots.len(), 14);
    let first: Vec<_> = spec.slots.iter().filter(|s| s.asset_id == r[0].id).collect();
    assert_eq!(first.len(), 4);
    assert_eq!(first[3].id, "asset_00_4");
}

#[test]
fn ranking_ignores_insertion_order() {
    let dir = tempfile::tempdir().unwrap();
    let (report, provider) = common::synthetic_library(dir.path(), 40);
    let mut rows: Vec<(String, EmbeddingVector)> =
        report.index.iter().map(|(id, v)| (id.to_string(), v.clone())).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(2));
    let mut shuffled = VectorIndex::new(report.index.dimension(), report.index.provider_tag());
    for (id, v) in rows {
        shuffled.insert(id, v).unwrap();
    }
    for record in report.manifest.records.iter().take(10) {
        let q = embed_caption(&record.caption, &provider).unwrap();
        assert_eq!(report.index.top_k(&q, 8).unwrap(), shuffled.top_k(&q, 8).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn top_k_is_prefix_of_full_sort(
        rows in proptest::collection::vec(proptest::collection::vec(-1.0f32..1.0, 6), 1..100),
        query in proptest::collection::vec(-1.0f32..1.0, 6),
        k in 1usize..12,
    ) {
        prop_assume!(query.iter().any(|x| *x != 0.0));
        let mut index = VectorIndex::new(6, "random");
        for (i, r) in rows.iter().enumerate() {
            if let Ok(v) = EmbeddingVector::new(r.clone()) {
                index.insert(format!("v{i:03}"), v).unwrap();
            }
        }
        let got = index.top_k(&EmbeddingVector::new(query.clone()).unwrap(), k).unwrap();
        let want = sorted_by_cosine(&index, &query);
        prop_assert_eq!(got.len(), k.min(index.len()));
        for ((gid, gs), (wid, ws)) in got.iter().zip(&want) {
            // Near-ties may order differently under the two summation orders.
            prop_assert!((gs - ws).abs() < 1e-9);
            if (gs - ws).abs() == 0.0 {
                prop_assert_eq!(gid, wid);
            }
        }
    }
}
