use super::AssetRecord;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const MANIFEST_FORMAT: &str = "sceneforge.manifest";

/// All records of an asset library.
///
/// On disk this is `manifest.jsonl`: one header line followed by one JSON
/// record per line.
#[derive(Debug, Clone, PartialEq)]
pub struct LibraryManifest {
    /// Incremented every time the manifest is rewritten.
    pub version: u64,
    pub created_at: String,
    pub records: Vec<AssetRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u64,
    created_at: String,
    record_count: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest {path} line {line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
}

impl LibraryManifest {
    pub fn new(version: u64, records: Vec<AssetRecord>) -> Self {
        Self {
            version,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            records,
        }
    }

    pub fn get(&self, id: &str) -> Option<&AssetRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Records whose display name equals `name`, ignoring case.
    pub fn find_by_name(&self, name: &str) -> Vec<&AssetRecord> {
        self.records
            .iter()
            .filter(|r| r.display_name.eq_ignore_ascii_case(name.trim()))
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            format: MANIFEST_FORMAT.to_string(),
            version: self.version,
            created_at: self.created_at.clone(),
            record_count: self.records.len(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, path: &Path) -> Result<Self, ManifestError> {
        let fmt_err = |line: usize, message: String| ManifestError::Format {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| fmt_err(1, "empty manifest".into()))?;
        let header: Header = serde_json::from_str(first).map_err(|e| fmt_err(1, e.to_string()))?;
        if header.format != MANIFEST_FORMAT {
            return Err(fmt_err(1, format!("unexpected format {:?}", header.format)));
        }
        let mut records = Vec::with_capacity(header.record_count);
        for (i, line) in lines {
            let r: AssetRecord = serde_json::from_str(line).map_err(|e| fmt_err(i + 1, e.to_string()))?;
            records.push(r);
        }
        if records.len() != header.record_count {
            return Err(fmt_err(
                1,
                format!("header announces {} records, found {}", header.record_count, records.len()),
            ));
        }
        Ok(Self {
            version: header.version,
            created_at: header.created_at,
            records,
        })
    }

    pub fn load(library_dir: &Path) -> Result<Self, ManifestError> {
        let path = library_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|source| ManifestError::Io {
            path: path.clone(),
            source,
        })?;
        Self::from_jsonl(&text, &path)
    }

    /// Version the next write of `library_dir` should carry.
    pub fn next_version(library_dir: &Path) -> u64 {
        Self::load(library_dir).map(|m| m.version + 1).unwrap_or(1)
    }

    /// Writes `manifest.jsonl` via a temporary file and rename.
    pub fn save(&self, library_dir: &Path) -> Result<PathBuf, ManifestError> {
        let path = library_dir.join(MANIFEST_FILE);
        write_atomic(&path, self.to_jsonl().as_bytes())?;
        Ok(path)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ManifestError> {
    let io = |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}
