//! Offline demo data: box-shaped assets with placeholder views and the
//! scripted session for the living-room scene used by the examples and tests.

use crate::asset_library::mesh::write_box_obj;
use crate::asset_library::{ingest, IngestError, IngestOptions, IngestReport, ViewSet};
use crate::geometry::{Aabb, Vec3};
use crate::model_provider::{Provider, ScriptedFixture};
use std::path::{Path, PathBuf};

pub const LIVING_ROOM_PROMPT: &str = "a plant on a small table in front of the L-shaped sofa";

/// Scripted replies for ingesting [`LIVING_ROOM_ASSETS`] and building
/// [`LIVING_ROOM_PROMPT`] in a 5 x 5 x 3 room.
pub const LIVING_ROOM_FIXTURE_JSON: &str = include_str!("../fixtures/living_room.json");

/// A 1 x 1 grayscale PNG, enough for view files the scripted provider never decodes.
pub const PLACEHOLDER_PNG: &[u8] = &[
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00,
    0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00, 0x00, 0x3a, 0x7e, 0x9b, 0x55, 0x00, 0x00, 0x00,
    0x0a, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x68, 0x00, 0x00, 0x00, 0x82, 0x00, 0x81, 0x77, 0xcd, 0x72,
    0xb6, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoAsset {
    /// File stem; the display name is derived from it.
    pub stem: &'static str,
    /// Width, depth, height along scene axes.
    pub size: Vec3,
}

pub const LIVING_ROOM_ASSETS: [DemoAsset; 5] = [
    DemoAsset {
        stem: "l_shaped_sofa",
        size: Vec3::new(2.4, 1.8, 0.8),
    },
    DemoAsset {
        stem: "small_table",
        size: Vec3::new(0.6, 0.6, 0.45),
    },
    DemoAsset {
        stem: "potted_plant",
        size: Vec3::new(0.4, 0.4, 0.9),
    },
    DemoAsset {
        stem: "armchair",
        size: Vec3::new(0.9, 0.9, 0.95),
    },
    DemoAsset {
        stem: "floor_lamp",
        size: Vec3::new(0.4, 0.4, 1.6),
    },
];

pub fn living_room_bounds() -> Aabb {
    Aabb::room(5.0, 5.0, 3.0).expect("positive room size")
}

pub fn living_room_fixture() -> ScriptedFixture {
    serde_json::from_str(LIVING_ROOM_FIXTURE_JSON).expect("bundled fixture parses")
}

pub fn living_room_provider() -> Provider {
    Provider::scripted(living_room_fixture())
}

/// Writes `<stem>.obj` (a box, native frame) and its six placeholder views.
pub fn write_box_asset(asset_dir: &Path, asset: &DemoAsset) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(asset_dir)?;
    let mesh = asset_dir.join(format!("{}.obj", asset.stem));
    write_box_obj(&mesh, Vec3::new(asset.size.x, asset.size.z, asset.size.y))?;
    let views = ViewSet::for_mesh(&mesh);
    for p in views.orientation.iter().chain(views.caption.iter()) {
        std::fs::create_dir_all(p.parent().expect("view paths have a parent"))?;
        std::fs::write(p, PLACEHOLDER_PNG)?;
    }
    Ok(mesh)
}

/// Writes all living-room assets under `asset_dir`.
pub fn write_living_room_assets(asset_dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    LIVING_ROOM_ASSETS.iter().map(|a| write_box_asset(asset_dir, a)).collect()
}

/// Writes the living-room assets to `<work_dir>/assets` and ingests them into
/// `<work_dir>/library` with the scripted provider.
pub fn living_room_library(work_dir: &Path) -> Result<IngestReport, IngestError> {
    let assets = work_dir.join("assets");
    write_living_room_assets(&assets).map_err(|e| IngestError::Storage(e.to_string()))?;
    ingest(&assets, &work_dir.join("library"), &living_room_provider(), &IngestOptions::default())
}
