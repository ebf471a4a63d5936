//! Exact cosine search over caption embeddings.
//!
//! # On-disk format (`embeddings.bin`)
//!
//! All integers are little-endian.
//!
//! ```text
//! magic          8 bytes   "SFEMBIDX"
//! version        u32       1
//! dimension      u32
//! tag_len        u32
//! provider_tag   tag_len bytes, UTF-8
//! count          u32
//! count rows, ascending by asset id:
//!   id_len       u32
//!   id           id_len bytes, UTF-8
//!   values       dimension x f32
//! ```

use crate::asset_library::TripartiteCaption;
use crate::model_provider::{PromptLibrary, Provider, ProviderError};
use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

pub const INDEX_FILE: &str = "embeddings.bin";
pub const INDEX_MAGIC: &[u8; 8] = b"SFEMBIDX";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("caption is incomplete (missing {0:?}); it cannot be embedded")]
    IncompleteCaption(Vec<&'static str>),
    #[error("embedding failed: {0}")]
    Provider(#[from] ProviderError),
    #[error("index io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed index file: {0}")]
    Format(String),
}

/// A finite, non-zero dense vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::InvalidArgument("empty vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::InvalidArgument("vector has non-finite values".into()));
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(EmbedError::InvalidArgument("vector is all zeros".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }
}

/// Cosine similarity, accumulated in `f64` and clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::InvalidArgument(format!(
            "dimension mismatch: {} vs {}",
            a.dimension(),
            b.dimension()
        )));
    }
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.0.iter().zip(&b.0) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

/// The text embedded for a caption: all three sections with their headers.
pub fn embedding_document(caption: &TripartiteCaption, templates: &PromptLibrary) -> String {
    templates
        .render("embed_document", &caption.context())
        .expect("embed_document template uses only caption keys")
}

pub fn embed_caption(caption: &TripartiteCaption, provider: &Provider) -> Result<EmbeddingVector, EmbedError> {
    if !caption.is_complete() {
        return Err(EmbedError::IncompleteCaption(caption.missing_sections()));
    }
    let doc = embedding_document(caption, provider.templates());
    EmbeddingVector::new(provider.embed(&doc)?)
}

/// Embeddings of one provider, keyed by asset id.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dimension: usize,
    provider_tag: String,
    entries: BTreeMap<String, EmbeddingVector>,
}

impl VectorIndex {
    pub fn new(dimension: usize, provider_tag: impl Into<String>) -> Self {
        Self {
            dimension,
            provider_tag: provider_tag.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn provider_tag(&self) -> &str {
        &self.provider_tag
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingVector> {
        self.entries.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EmbeddingVector)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn insert(&mut self, id: impl Into<String>, v: EmbeddingVector) -> Result<(), EmbedError> {
        if v.dimension() != self.dimension {
            return Err(EmbedError::InvalidArgument(format!(
                "vector dimension {} does not match index dimension {}",
                v.dimension(),
                self.dimension
            )));
        }
        self.entries.insert(id.into(), v);
        Ok(())
    }

    /// Exact top-`k` by cosine score, descending, ties broken by ascending id.
    pub fn top_k(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<(String, f64)>, EmbedError> {
        if k == 0 {
            return Err(EmbedError::InvalidArgument("k must be at least 1".into()));
        }
        if query.dimension() != self.dimension {
            return Err(EmbedError::InvalidArgument(format!(
                "query dimension {} does not match index dimension {}",
                query.dimension(),
                self.dimension
            )));
        }
        let mut scored: Vec<(&str, f64)> = self
            .entries
            .iter()
            .map(|(id, v)| cosine_similarity(query, v).map(|s| (id.as_str(), s)))
            .collect::<Result<_, _>>()?;
        let rank = |a: &(&str, f64), b: &(&str, f64)| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0));
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, rank);
            scored.truncate(k);
        }
        scored.sort_by(rank);
        Ok(scored.into_iter().map(|(id, s)| (id.to_string(), s)).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.entries.len() * (16 + 4 * self.dimension));
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dimension as u32).to_le_bytes());
        out.extend_from_slice(&(self.provider_tag.len() as u32).to_le_bytes());
        out.extend_from_slice(self.provider_tag.as_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (id, v) in &self.entries {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v.values() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbedError> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| EmbedError::Format("truncated header".into()))?;
        if &magic != INDEX_MAGIC {
            return Err(EmbedError::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != INDEX_VERSION {
            return Err(EmbedError::Format(format!("unsupported version {version}")));
        }
        let dimension = read_u32(&mut r)? as usize;
        let provider_tag = read_string(&mut r)?;
        let count = read_u32(&mut r)?;
        let mut index = VectorIndex::new(dimension, provider_tag);
        for _ in 0..count {
            let id = read_string(&mut r)?;
            let mut values = Vec::with_capacity(dimension);
            for _ in 0..dimension {
                let mut b = [0u8; 4];
                r.read_exact(&mut b).map_err(|_| EmbedError::Format("truncated row".into()))?;
                values.push(f32::from_le_bytes(b));
            }
            index.insert(id, EmbeddingVector::new(values)?)?;
        }
        if !r.is_empty() {
            return Err(EmbedError::Format(format!("{} trailing bytes", r.len())));
        }
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        crate::asset_library::manifest::write_atomic(path, &self.to_bytes())
            .map_err(|e| EmbedError::Io(std::io::Error::other(e.to_string())))
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn read_u32(r: &mut &[u8]) -> Result<u32, EmbedError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| EmbedError::Format("truncated integer".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_string(r: &mut &[u8]) -> Result<String, EmbedError> {
    let len = read_u32(r)? as usize;
    if r.len() < len {
        return Err(EmbedError::Format("truncated string".into()));
    }
    let (head, tail) = r.split_at(len);
    *r = tail;
    String::from_utf8(head.to_vec()).map_err(|e| EmbedError::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_provider::ScriptedFixture;
    use proptest::prelude::*;

    fn v(x: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let a = v(&[0.3, -1.2, 4.0]);
        assert_eq!(cosine_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let s = cosine_similarity(&v(&[1.0, 0.0]), &v(&[1.0, 1.0])).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(cosine_similarity(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
        assert!(EmbeddingVector::new(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn top_k_examples() {
        let mut idx = VectorIndex::new(2, "t");
        idx.insert("a", v(&[1.0, 0.0])).unwrap();
        idx.insert("b", v(&[0.0, 1.0])).unwrap();
        idx.insert("c", v(&[1.0, 1.0])).unwrap();
        let r = idx.top_k(&v(&[0.0, 2.0]), 1).unwrap();
        assert_eq!(r, vec![("b".to_string(), 1.0)]);
        let all = idx.top_k(&v(&[1.0, 0.0]), 10).unwrap();
        assert_eq!(all.iter().map(|(i, _)| i.as_str()).collect::<Vec<_>>(), ["a", "c", "b"]);
        assert!(VectorIndex::new(2, "t").top_k(&v(&[1.0, 0.0]), 5).unwrap().is_empty());
        assert!(idx.top_k(&v(&[1.0, 0.0]), 0).is_err());
    }

    #[test]
    fn ties_break_on_id() {
        let mut idx = VectorIndex::new(2, "t");
        for id in ["z", "m", "a"] {
            idx.insert(id, v(&[1.0, 0.0])).unwrap();
        }
        let r = idx.top_k(&v(&[1.0, 0.0]), 2).unwrap();
        assert_eq!(r.iter().map(|(i, _)| i.as_str()).collect::<Vec<_>>(), ["a", "m"]);
    }

    #[test]
    fn embedding_is_deterministic_and_needs_complete_caption() {
        let provider = Provider::scripted(ScriptedFixture {
            embedding_dim: Some(8),
            ..Default::default()
        });
        let c = TripartiteCaption::new("red wooden", "sitting", "kitchen");
        let a = embed_caption(&c, &provider).unwrap();
        assert_eq!(a.dimension(), 8);
        assert_eq!(a, embed_caption(&c.clone(), &provider).unwrap());
        let doc = embedding_document(&c, provider.templates());
        assert!(doc.contains("Physical properties: red wooden"));
        assert!(matches!(
            embed_caption(&TripartiteCaption::new("x", "", "z"), &provider),
            Err(EmbedError::IncompleteCaption(_))
        ));
    }

    #[test]
    fn bad_files_rejected() {
        assert!(VectorIndex::from_bytes(b"nope").is_err());
        let mut idx = VectorIndex::new(1, "t");
        idx.insert("a", v(&[1.0])).unwrap();
        let mut bytes = idx.to_bytes();
        bytes.push(0);
        assert!(VectorIndex::from_bytes(&bytes).is_err());
        bytes.truncate(bytes.len() - 3);
        assert!(VectorIndex::from_bytes(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            a in proptest::collection::vec(-5.0f32..5.0, 6),
            b in proptest::collection::vec(-5.0f32..5.0, 6),
            k in 1u32..8,
        ) {
            prop_assume!(a.iter().any(|x| *x != 0.0) && b.iter().any(|x| *x != 0.0));
            let (va, vb) = (v(&a), v(&b));
            let s = cosine_similarity(&va, &vb).unwrap();
            prop_assert_eq!(s, cosine_similarity(&vb, &va).unwrap());
            prop_assert!((-1.0..=1.0).contains(&s));
            // Power-of-two scaling is exact in f32, so the score must not move.
            let scale = (1u32 << k) as f32;
            let scaled = v(&a.iter().map(|x| x * scale).collect::<Vec<_>>());
            prop_assert!((cosine_similarity(&scaled, &vb).unwrap() - s).abs() < 1e-12);
        }

        #[test]
        fn index_round_trip(rows in proptest::collection::vec(proptest::collection::vec(-1.0f32..1.0, 4), 1..20)) {
            let mut idx = VectorIndex::new(4, "scripted");
            for (i, r) in rows.iter().enumerate() {
                if r.iter().any(|x| *x != 0.0) {
                    idx.insert(format!("id{i:03}"), v(r)).unwrap();
                }
            }
            let back = VectorIndex::from_bytes(&idx.to_bytes()).unwrap();
            prop_assert_eq!(back, idx);
        }
    }
}
