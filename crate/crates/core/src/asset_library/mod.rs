//! Asset ingestion: measure meshes, pick their front, caption and embed
//! them, and persist the library.
//!
//! # Library layout
//!
//! ```text
//! <asset_dir>/chair.glb
//! <asset_dir>/chair/views/{0,90,180,270}.png   turntable views
//! <asset_dir>/chair/caption/{a,b}.png          captioning views
//! <library_dir>/manifest.jsonl
//! <library_dir>/embeddings.bin
//! ```
//!
//! `AssetRecord::size` holds the mesh extents along scene axes before the
//! front correction; [`AssetRecord::canonical_size`] applies it.

mod caption;
pub mod manifest;
pub mod mesh;

pub use caption::{parse_caption, CaptionParseError, TripartiteCaption};
pub use manifest::{LibraryManifest, ManifestError, MANIFEST_FILE};
pub use mesh::{load_mesh, measure_mesh, MeshData, MeshError};

use crate::embedding_store::{embed_caption, VectorIndex, INDEX_FILE};
use crate::geometry::{size_after_rotation, EulerRotation, Vec3};
use crate::model_provider::{ParsedReply, Provider, ProviderError, ProviderRequest, RequestKind, SchemaTag};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

/// Yaw, in degrees, that turns a mesh so its front faces the canonical
/// forward direction. Only quarter turns are representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct QuarterTurn(u16);

impl QuarterTurn {
    pub const ALL: [QuarterTurn; 4] = [QuarterTurn(0), QuarterTurn(90), QuarterTurn(180), QuarterTurn(270)];

    pub fn from_degrees(deg: u16) -> Option<Self> {
        matches!(deg, 0 | 90 | 180 | 270).then_some(Self(deg))
    }

    /// Maps a 1-based view number to the yaw it was rendered at.
    pub fn from_view_index(index: usize) -> Option<Self> {
        (1..=4).contains(&index).then(|| Self(((index - 1) * 90) as u16))
    }

    pub fn degrees(self) -> u16 {
        self.0
    }

    pub fn rotation(self) -> EulerRotation {
        EulerRotation::from_yaw(self.0 as f64)
    }
}

impl TryFrom<u16> for QuarterTurn {
    type Error = String;
    fn try_from(v: u16) -> Result<Self, String> {
        Self::from_degrees(v).ok_or_else(|| format!("front_yaw_offset must be 0, 90, 180 or 270, got {v}"))
    }
}

impl From<QuarterTurn> for u16 {
    fn from(q: QuarterTurn) -> u16 {
        q.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetFlag {
    /// The provider never named a front view; offset left at 0.
    OrientationUnresolved,
    /// Orientation inference was skipped on request.
    OrientationSkipped,
    /// Some caption section is empty; retrievable by name only.
    CaptionIncomplete,
    /// No embedding stored for this asset.
    EmbeddingMissing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetRecord {
    pub id: String,
    pub mesh_path: PathBuf,
    pub display_name: String,
    /// Mesh extents along scene axes, before the front correction.
    pub size: Vec3,
    pub front_yaw_offset: QuarterTurn,
    pub caption: TripartiteCaption,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_ref: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<AssetFlag>,
}

impl AssetRecord {
    /// Extents once the mesh is turned to face forward.
    pub fn canonical_size(&self) -> Vec3 {
        size_after_rotation(self.size, self.front_yaw_offset.rotation())
            .expect("record sizes are positive and finite")
            .0
    }

    pub fn has_flag(&self, flag: AssetFlag) -> bool {
        self.flags.contains(&flag)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Mesh { path: PathBuf, source: MeshError },
    #[error("{path}: same content as asset {id} already ingested from {first}")]
    Duplicate { path: PathBuf, id: String, first: PathBuf },
    #[error("front orientation unresolved; last reply: {raw:?}")]
    OrientationUnresolved { raw: String },
    #[error("caption incomplete: missing {missing:?}")]
    CaptionIncomplete {
        missing: Vec<&'static str>,
        partial: TripartiteCaption,
    },
    #[error("{0}")]
    Provider(#[from] ProviderError),
    #[error("{0}")]
    Storage(String),
}

/// Rendered views belonging to one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    /// Turntable views at yaw 0, 90, 180 and 270.
    pub orientation: [PathBuf; 4],
    pub caption: [PathBuf; 2],
}

impl ViewSet {
    pub fn for_mesh(mesh_path: &Path) -> Self {
        let stem = mesh_path.file_stem().unwrap_or_default();
        let dir = mesh_path.parent().unwrap_or(Path::new("")).join(stem);
        Self {
            orientation: ["0", "90", "180", "270"].map(|y| dir.join("views").join(format!("{y}.png"))),
            caption: ["a", "b"].map(|c| dir.join("caption").join(format!("{c}.png"))),
        }
    }

    pub fn has_orientation_views(&self) -> bool {
        self.orientation.iter().all(|p| p.is_file())
    }

    pub fn has_caption_views(&self) -> bool {
        self.caption.iter().all(|p| p.is_file())
    }
}

/// First 16 bytes of the SHA-256 of the file, as hex.
pub fn asset_id(mesh_path: &Path) -> Result<String, IngestError> {
    let bytes = std::fs::read(mesh_path).map_err(|e| IngestError::Mesh {
        path: mesh_path.to_path_buf(),
        source: MeshError::Read(e.to_string()),
    })?;
    let digest = Sha256::digest(&bytes);
    Ok(digest[..16].iter().map(|b| format!("{b:02x}")).collect())
}

/// `"l_shaped_sofa"` → `"l shaped sofa"`.
pub fn display_name_for(mesh_path: &Path) -> String {
    mesh_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("asset")
        .replace(['_', '-'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Extents of the mesh vertices in the mesh's own frame.
pub fn measure_asset(mesh_path: &Path) -> Result<Vec3, IngestError> {
    let mesh_err = |source| IngestError::Mesh {
        path: mesh_path.to_path_buf(),
        source,
    };
    let mesh = load_mesh(mesh_path).map_err(mesh_err)?;
    measure_mesh(&mesh).map_err(mesh_err)
}

/// Asks the provider which of the four turntable views shows the front.
pub fn infer_front_orientation(views: &[PathBuf; 4], name: &str, provider: &Provider) -> Result<QuarterTurn, IngestError> {
    let ctx = BTreeMap::from([("name".to_string(), name.to_string())]);
    let prompt = provider.render_prompt("orient", &ctx).map_err(ProviderError::from)?;
    let request = ProviderRequest::new(RequestKind::Orient, prompt, views.to_vec())?.with_schema(SchemaTag::ViewIndex);
    match provider.complete(&request) {
        Ok(reply) => match reply.parsed {
            ParsedReply::ViewIndex(i) => QuarterTurn::from_view_index(i as usize)
                .ok_or(IngestError::OrientationUnresolved { raw: reply.text }),
            _ => Err(IngestError::OrientationUnresolved { raw: reply.text }),
        },
        Err(ProviderError::Validation { raw, .. }) => Err(IngestError::OrientationUnresolved { raw }),
        Err(e) => Err(e.into()),
    }
}

/// Asks the provider for a three-part description from two views.
pub fn caption_asset(views: &[PathBuf; 2], name: &str, provider: &Provider) -> Result<TripartiteCaption, IngestError> {
    let ctx = BTreeMap::from([("name".to_string(), name.to_string())]);
    let prompt = provider.render_prompt("caption", &ctx).map_err(ProviderError::from)?;
    let request = ProviderRequest::new(RequestKind::Caption, prompt, views.to_vec())?;
    match provider.complete(&request) {
        Ok(reply) => match reply.parsed {
            ParsedReply::Caption(c) => Ok(c),
            _ => unreachable!("caption requests validate to captions"),
        },
        Err(ProviderError::Validation { raw, .. }) => {
            let partial = parse_caption(&raw).unwrap_or_else(|e| e.partial);
            Err(IngestError::CaptionIncomplete {
                missing: partial.missing_sections(),
                partial,
            })
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub skip_orientation: bool,
    /// Assets processed at once; provider calls are further limited by the
    /// provider's own rate limiter.
    pub concurrency: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            skip_orientation: false,
            concurrency: 4,
        }
    }
}

#[derive(Debug)]
pub struct IngestReport {
    pub manifest: LibraryManifest,
    pub index: VectorIndex,
    /// Assets that produced no record.
    pub errors: Vec<IngestError>,
    /// Non-fatal problems on records that were kept.
    pub warnings: Vec<String>,
}

struct Ingested {
    record: AssetRecord,
    embedding: Option<Vec<f32>>,
    warnings: Vec<String>,
}

fn ingest_one(mesh_path: &Path, provider: &Provider, options: &IngestOptions) -> Result<Ingested, IngestError> {
    let id = asset_id(mesh_path)?;
    let size = mesh::native_extents_to_scene(measure_asset(mesh_path)?);
    let name = display_name_for(mesh_path);
    let views = ViewSet::for_mesh(mesh_path);
    let mut flags = BTreeSet::new();
    let mut warnings = Vec::new();
    let label = mesh_path.display();

    let front_yaw_offset = if options.skip_orientation {
        flags.insert(AssetFlag::OrientationSkipped);
        QuarterTurn::default()
    } else if !views.has_orientation_views() {
        flags.insert(AssetFlag::OrientationUnresolved);
        warnings.push(format!("{label}: turntable views missing; front offset left at 0"));
        QuarterTurn::default()
    } else {
        match infer_front_orientation(&views.orientation, &name, provider) {
            Ok(q) => q,
            Err(IngestError::OrientationUnresolved { raw }) => {
                flags.insert(AssetFlag::OrientationUnresolved);
                warnings.push(format!("{label}: orientation unresolved (reply {raw:?}); front offset left at 0"));
                QuarterTurn::default()
            }
            Err(e) => return Err(e),
        }
    };

    let caption = if !views.has_caption_views() {
        warnings.push(format!("{label}: caption views missing; retrievable by name only"));
        TripartiteCaption::default()
    } else {
        match caption_asset(&views.caption, &name, provider) {
            Ok(c) => c,
            Err(IngestError::CaptionIncomplete { missing, partial }) => {
                warnings.push(format!("{label}: caption missing {missing:?}; retrievable by name only"));
                partial
            }
            Err(e) => return Err(e),
        }
    };
    if !caption.is_complete() {
        flags.insert(AssetFlag::CaptionIncomplete);
    }

    let embedding = if caption.is_complete() {
        match embed_caption(&caption, provider) {
            Ok(v) => Some(v.values().to_vec()),
            Err(e) => {
                warnings.push(format!("{label}: embedding failed: {e}"));
                None
            }
        }
    } else {
        None
    };
    if embedding.is_none() {
        flags.insert(AssetFlag::EmbeddingMissing);
    }

    Ok(Ingested {
        record: AssetRecord {
            embedding_ref: embedding.as_ref().map(|_| id.clone()),
            id,
            mesh_path: std::fs::canonicalize(mesh_path).unwrap_or_else(|_| mesh_path.to_path_buf()),
            display_name: name,
            size,
            front_yaw_offset,
            caption,
            flags,
        },
        embedding,
        warnings,
    })
}

/// Mesh files directly inside `asset_dir`, sorted by path.
pub fn discover_meshes(asset_dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let entries = std::fs::read_dir(asset_dir)
        .map_err(|e| IngestError::Storage(format!("cannot list {}: {e}", asset_dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && mesh::is_mesh_file(p))
        .collect();
    out.sort();
    Ok(out)
}

/// Ingests every mesh in `asset_dir` and writes the manifest and the
/// embedding index into `library_dir`.
///
/// Failures of single assets are collected in the report; only storage
/// errors abort.
pub fn ingest(
    asset_dir: &Path,
    library_dir: &Path,
    provider: &Provider,
    options: &IngestOptions,
) -> Result<IngestReport, IngestError> {
    let meshes = discover_meshes(asset_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.concurrency.max(1))
        .build()
        .map_err(|e| IngestError::Storage(e.to_string()))?;
    let results: Vec<Result<Ingested, IngestError>> =
        pool.install(|| meshes.par_iter().map(|p| ingest_one(p, provider, options)).collect());

    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut embeddings = Vec::new();
    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    for result in results {
        match result {
            Ok(done) => {
                if let Some(first) = seen.get(&done.record.id) {
                    errors.push(IngestError::Duplicate {
                        path: done.record.mesh_path.clone(),
                        id: done.record.id.clone(),
                        first: first.clone(),
                    });
                    continue;
                }
                seen.insert(done.record.id.clone(), done.record.mesh_path.clone());
                warnings.extend(done.warnings);
                if let Some(v) = done.embedding {
                    embeddings.push((done.record.id.clone(), v));
                }
                records.push(done.record);
            }
            Err(e) => errors.push(e),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    for e in &errors {
        log::error!("ingest: {e}");
    }

    let dimension = embeddings.first().map_or(0, |(_, v)| v.len());
    let mut index = VectorIndex::new(dimension, provider.tag());
    for (id, values) in embeddings {
        let inserted = crate::embedding_store::EmbeddingVector::new(values).and_then(|v| index.insert(id.clone(), v));
        if let Err(e) = inserted {
            warnings.push(format!("{id}: embedding not indexed: {e}"));
            if let Some(r) = records.iter_mut().find(|r| r.id == id) {
                r.embedding_ref = None;
                r.flags.insert(AssetFlag::EmbeddingMissing);
            }
        }
    }

    let manifest = LibraryManifest::new(LibraryManifest::next_version(library_dir), records);
    index
        .save(&library_dir.join(INDEX_FILE))
        .map_err(|e| IngestError::Storage(e.to_string()))?;
    manifest.save(library_dir).map_err(|e| IngestError::Storage(e.to_string()))?;
    Ok(IngestReport {
        manifest,
        index,
        errors,
        warnings,
    })
}

/// Loads a library written by [`ingest`].
pub fn load_library(library_dir: &Path) -> Result<(LibraryManifest, VectorIndex), IngestError> {
    let manifest = LibraryManifest::load(library_dir).map_err(|e| IngestError::Storage(e.to_string()))?;
    let index = VectorIndex::load(&library_dir.join(INDEX_FILE)).map_err(|e| IngestError::Storage(e.to_string()))?;
    Ok((manifest, index))
}
