use super::{Backend, ProviderError, ProviderRequest, RawEmbedding, RawReply, RequestKind, UsageCounters};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

/// Dimension of the offline hashing embedder unless a fixture overrides it.
pub const DEFAULT_SCRIPTED_DIM: usize = 64;

/// Canned replies for one request kind.
///
/// `match` restricts the entry to prompts containing that substring. An
/// entry with several replies serves them in sequence; the last one repeats
/// once the sequence is used up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureEntry {
    pub kind: RequestKind,
    #[serde(default, rename = "match", skip_serializing_if = "Option::is_none")]
    pub matcher: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replies: Vec<String>,
}

impl FixtureEntry {
    pub fn new<I, S>(kind: RequestKind, replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            kind,
            matcher: None,
            reply: None,
            replies: replies.into_iter().map(Into::into).collect(),
        }
    }

    pub fn matching(mut self, substring: impl Into<String>) -> Self {
        self.matcher = Some(substring.into());
        self
    }

    fn all_replies(&self) -> Vec<String> {
        self.reply.iter().cloned().chain(self.replies.iter().cloned()).collect()
    }
}

/// A scripted session: canned replies keyed by request kind.
///
/// Replies for pipeline kinds are consumed in order per entry. Replies for
/// ingest kinds (caption, orient, embed) are keyed, not consumed: the reply
/// depends only on the prompt and the retry attempt, so concurrent ingestion
/// stays deterministic.
///
/// Every kind has a built-in default reply, used when no entry matches.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedFixture {
    #[serde(default)]
    pub entries: Vec<FixtureEntry>,
    /// Dimension of the hashing embedder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
}

impl ScriptedFixture {
    pub fn new(entries: Vec<FixtureEntry>) -> Self {
        Self {
            entries,
            embedding_dim: None,
        }
    }

    pub fn push(&mut self, entry: FixtureEntry) -> &mut Self {
        self.entries.push(entry);
        self
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("cannot read fixture {}: {e}", path.display())))?;
        let fixture: ScriptedFixture = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Config(format!("invalid fixture {}: {e}", path.display())))?;
        fixture.check()?;
        Ok(fixture)
    }

    /// Every entry needs at least one reply.
    pub fn check(&self) -> Result<(), ProviderError> {
        for (i, e) in self.entries.iter().enumerate() {
            if e.all_replies().is_empty() {
                return Err(ProviderError::Config(format!("fixture entry {i} ({}) has no replies", e.kind)));
            }
        }
        Ok(())
    }

    /// The reply used when no entry of `kind` matches a request.
    pub fn default_reply(kind: RequestKind) -> &'static str {
        match kind {
            RequestKind::Caption => {
                "(1) Physical properties: an object of unspecified appearance.\n(2) Functional properties: unspecified purpose.\n(3) Contextual properties: unspecified setting."
            }
            RequestKind::Orient => "1",
            RequestKind::ExtractObjects => "```json\n{\"objects\": []}\n```",
            RequestKind::Vote => "1",
            RequestKind::ExtractConstraints => "```json\n{\"constraints\": []}\n```",
            RequestKind::Order => "```json\n{\"order\": []}\n```",
            RequestKind::Place => "```json\n{\"position\": [0, 0, 0], \"rotation\": [0, 0, 0]}\n```",
            RequestKind::Refine => "```json\n{\"action\": \"keep\", \"rationale\": \"default scripted verdict\"}\n```",
            RequestKind::Embed => "[1.0]",
        }
    }
}

/// Deterministic offline backend replaying a [`ScriptedFixture`].
#[derive(Debug)]
pub struct ScriptedBackend {
    fixture: ScriptedFixture,
    replies: Vec<Vec<String>>,
    hits: Vec<AtomicUsize>,
    dim: usize,
}

impl ScriptedBackend {
    pub fn new(fixture: ScriptedFixture) -> Self {
        let replies = fixture.entries.iter().map(FixtureEntry::all_replies).collect();
        let hits = fixture.entries.iter().map(|_| AtomicUsize::new(0)).collect();
        let dim = fixture.embedding_dim.unwrap_or(DEFAULT_SCRIPTED_DIM).max(1);
        Self {
            fixture,
            replies,
            hits,
            dim,
        }
    }

    fn find(&self, kind: RequestKind, prompt: &str) -> Option<usize> {
        self.fixture.entries.iter().position(|e| {
            e.kind == kind && e.matcher.as_deref().is_none_or(|m| prompt.contains(m)) && !e.all_replies().is_empty()
        })
    }
}

impl Backend for ScriptedBackend {
    fn tag(&self) -> String {
        "scripted".to_string()
    }

    fn send(&self, request: &ProviderRequest, attempt: u32) -> Result<RawReply, ProviderError> {
        let text = match self.find(request.kind, &request.prompt) {
            Some(i) => {
                let replies = &self.replies[i];
                let idx = if request.kind.is_ingest() {
                    attempt as usize
                } else {
                    self.hits[i].fetch_add(1, Ordering::SeqCst)
                };
                replies[idx.min(replies.len() - 1)].clone()
            }
            None => ScriptedFixture::default_reply(request.kind).to_string(),
        };
        Ok(RawReply {
            text,
            usage: UsageCounters::default(),
        })
    }

    fn embed(&self, text: &str) -> Result<RawEmbedding, ProviderError> {
        if let Some(i) = self.find(RequestKind::Embed, text) {
            let values: Vec<f32> = serde_json::from_str(&self.replies[i][0])
                .map_err(|e| ProviderError::Config(format!("embed fixture reply is not a float array: {e}")))?;
            return Ok(RawEmbedding {
                values,
                usage: UsageCounters::default(),
            });
        }
        Ok(RawEmbedding {
            values: hash_embedding(text, self.dim),
            usage: UsageCounters::default(),
        })
    }

    fn is_scripted(&self) -> bool {
        true
    }
}

/// Signed feature hashing of lowercase word tokens into `dim` buckets.
///
/// Texts sharing words land near each other, identical texts map to
/// identical vectors, and the output never depends on platform or run.
pub fn hash_embedding(text: &str, dim: usize) -> Vec<f32> {
    let mut v = vec![0f32; dim];
    for token in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
    {
        let digest = Sha256::digest(token.as_bytes());
        let mut bucket_bytes = [0u8; 8];
        bucket_bytes.copy_from_slice(&digest[..8]);
        let bucket = (u64::from_le_bytes(bucket_bytes) % dim as u64) as usize;
        let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
        v[bucket] += sign;
    }
    if v.iter().all(|x| *x == 0.0) {
        v[0] = 1.0;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(kind: RequestKind, prompt: &str) -> ProviderRequest {
        let images = if kind.takes_images() { vec!["v.png".into()] } else { vec![] };
        ProviderRequest::new(kind, prompt.into(), images).unwrap()
    }

    #[test]
    fn matcher_selects_entry() {
        let b = ScriptedBackend::new(ScriptedFixture::new(vec![
            FixtureEntry::new(RequestKind::Place, ["a"]).matching("[chair_1]"),
            FixtureEntry::new(RequestKind::Place, ["b"]),
        ]));
        assert_eq!(b.send(&req(RequestKind::Place, "Object to place: [chair_1]"), 0).unwrap().text, "a");
        assert_eq!(b.send(&req(RequestKind::Place, "Object to place: [desk_1]"), 0).unwrap().text, "b");
    }

    #[test]
    fn pipeline_replies_are_consumed_and_last_repeats() {
        let b = ScriptedBackend::new(ScriptedFixture::new(vec![FixtureEntry::new(RequestKind::Vote, ["1", "2"])]));
        let texts: Vec<String> = (0..3).map(|_| b.send(&req(RequestKind::Vote, "x"), 0).unwrap().text).collect();
        assert_eq!(texts, ["1", "2", "2"]);
    }

    #[test]
    fn ingest_replies_are_keyed_by_attempt() {
        let b = ScriptedBackend::new(ScriptedFixture::new(vec![FixtureEntry::new(RequestKind::Orient, ["?", "3"])]));
        for _ in 0..3 {
            assert_eq!(b.send(&req(RequestKind::Orient, "x"), 0).unwrap().text, "?");
            assert_eq!(b.send(&req(RequestKind::Orient, "x"), 1).unwrap().text, "3");
        }
    }

    #[test]
    fn defaults_exist_for_every_kind() {
        let b = ScriptedBackend::new(ScriptedFixture::default());
        for kind in RequestKind::ALL {
            if kind != RequestKind::Embed {
                assert!(!b.send(&req(kind, "x"), 0).unwrap().text.is_empty());
            }
        }
    }

    #[test]
    fn hashing_embedder_is_deterministic() {
        let a = hash_embedding("A wooden chair with four legs", 8);
        let b = hash_embedding("a wooden CHAIR with four legs", 8);
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        assert!(a.iter().any(|x| *x != 0.0));
        assert_eq!(hash_embedding("", 4), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn fixture_json_shape() {
        let text = r#"{"entries": [{"kind": "vote", "match": "sofa", "reply": "2"}], "embedding_dim": 16}"#;
        let f: ScriptedFixture = serde_json::from_str(text).unwrap();
        f.check().unwrap();
        assert_eq!(f.entries[0].matcher.as_deref(), Some("sofa"));
        let bad: Result<ScriptedFixture, _> = serde_json::from_str(r#"{"entries": [], "bogus": 1}"#);
        assert!(bad.is_err());
        let empty = ScriptedFixture::new(vec![FixtureEntry::new(RequestKind::Vote, Vec::<String>::new())]);
        assert!(empty.check().is_err());
    }
}
