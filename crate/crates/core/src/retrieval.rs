//! From a scene prompt to concrete library assets.
//!
//! The provider lists the objects a prompt needs, each with a desired
//! three-part description. Each description is embedded, the closest `k`
//! library assets are shortlisted by cosine score, and the provider votes
//! for one of them or rejects them all.

use crate::asset_library::{AssetFlag, LibraryManifest, TripartiteCaption};
use crate::embedding_store::{embed_caption, EmbedError, VectorIndex};
use crate::model_provider::parse::VoteChoice;
use crate::model_provider::{json_check, ParsedReply, Provider, ProviderError, ProviderRequest, RequestKind, SchemaTag};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_SHORTLIST_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequiredObject {
    pub name: String,
    pub count: u32,
    /// What the ideal asset would look like, in caption form.
    pub description: TripartiteCaption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub asset_id: String,
    pub display_name: String,
    /// Cosine score, or `None` for assets matched by name only.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Selected { asset_id: String },
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalDecision {
    pub required: RequiredObject,
    pub candidates: Vec<Candidate>,
    pub outcome: Outcome,
    /// The vote could not be parsed and the top candidate was taken.
    #[serde(default)]
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RetrievalDecision {
    pub fn selected(&self) -> Option<&str> {
        match &self.outcome {
            Outcome::Selected { asset_id } => Some(asset_id),
            Outcome::NoMatch => None,
        }
    }
}

/// The `retrieve` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub prompt: String,
    pub k: usize,
    pub decisions: Vec<RetrievalDecision>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Deserialize)]
struct ObjectsReply {
    objects: Vec<RawObject>,
}

#[derive(Debug, Deserialize)]
struct RawObject {
    name: String,
    #[serde(default = "one")]
    count: u32,
    description: TripartiteCaption,
}

fn one() -> u32 {
    1
}

fn name_key(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Asks the provider which objects the scene needs.
///
/// Entries with the same name (ignoring case and spacing) are merged and
/// their counts added. With `override_count`, the provider is asked for
/// exactly that many object types and any surplus is cut.
pub fn extract_required_objects(
    scene_prompt: &str,
    provider: &Provider,
    override_count: Option<usize>,
) -> Result<(Vec<RequiredObject>, Vec<String>), RetrievalError> {
    if scene_prompt.trim().is_empty() {
        return Err(RetrievalError::Precondition("scene prompt is empty".into()));
    }
    let count_instruction = match override_count {
        Some(n) => format!("List exactly {n} different object types."),
        None => "List every object the description mentions or clearly implies.".to_string(),
    };
    let ctx = BTreeMap::from([
        ("prompt".to_string(), scene_prompt.to_string()),
        ("count_instruction".to_string(), count_instruction),
    ]);
    let prompt = provider.render_prompt("extract_objects", &ctx).map_err(ProviderError::from)?;
    let request = ProviderRequest::new(RequestKind::ExtractObjects, prompt, vec![])?;
    let reply: ObjectsReply = provider.complete_checked(&request, json_check::<ObjectsReply>)?.json()?;

    let mut warnings = Vec::new();
    let mut merged: Vec<RequiredObject> = Vec::new();
    for raw in reply.objects {
        let key = name_key(&raw.name);
        if let Some(existing) = merged.iter_mut().find(|o| name_key(&o.name) == key) {
            existing.count += raw.count.max(1);
            continue;
        }
        merged.push(RequiredObject {
            name: raw.name.trim().to_string(),
            count: raw.count.max(1),
            description: raw.description,
        });
    }
    if let Some(n) = override_count {
        if merged.len() > n {
            warnings.push(format!("provider listed {} object types, keeping the first {n}", merged.len()));
            merged.truncate(n);
        } else if merged.len() < n {
            warnings.push(format!("asked for {n} object types, provider listed {}", merged.len()));
        }
    }
    if merged.is_empty() {
        warnings.push("no objects extracted; the scene will be empty".into());
    }
    Ok((merged, warnings))
}

/// The `k` library assets closest to the desired description.
///
/// Assets whose caption is incomplete have no embedding; they join the
/// shortlist (unscored, ahead of the cut) when their name equals the
/// requested name.
pub fn shortlist(
    required: &RequiredObject,
    manifest: &LibraryManifest,
    index: &VectorIndex,
    provider: &Provider,
    k: usize,
) -> Result<Vec<Candidate>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::Precondition("k must be at least 1".into()));
    }
    let by_name: Vec<Candidate> = manifest
        .find_by_name(&required.name)
        .into_iter()
        .filter(|r| r.has_flag(AssetFlag::CaptionIncomplete))
        .take(k)
        .map(|r| Candidate {
            asset_id: r.id.clone(),
            display_name: r.display_name.clone(),
            score: None,
        })
        .collect();
    if index.is_empty() && by_name.is_empty() {
        return Err(RetrievalError::Precondition("embedding index is empty".into()));
    }
    let mut out = Vec::new();
    if !index.is_empty() && by_name.len() < k {
        let query = embed_caption(&required.description, provider)?;
        for (id, score) in index.top_k(&query, k - by_name.len())? {
            let display_name = manifest.get(&id).map(|r| r.display_name.clone()).unwrap_or_default();
            out.push(Candidate {
                asset_id: id,
                display_name,
                score: Some(score),
            });
        }
    }
    out.extend(by_name);
    Ok(out)
}

fn candidate_list(candidates: &[Candidate], manifest: &LibraryManifest) -> String {
    candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut line = format!("{}. {}", i + 1, c.display_name);
            if let Some(r) = manifest.get(&c.asset_id) {
                if r.caption.is_complete() {
                    line.push_str(&format!(
                        "\n   Physical: {}\n   Functional: {}\n   Contextual: {}",
                        r.caption.physical, r.caption.functional, r.caption.contextual
                    ));
                }
            }
            line
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Lets the provider pick among the shortlist or reject it.
///
/// A vote that never parses falls back to the top candidate and marks the
/// decision degraded. An empty shortlist is a `NoMatch` without a call.
pub fn vote(
    required: &RequiredObject,
    candidates: Vec<Candidate>,
    scene_prompt: &str,
    manifest: &LibraryManifest,
    provider: &Provider,
) -> Result<RetrievalDecision, RetrievalError> {
    let decision = |outcome, degraded| RetrievalDecision {
        required: required.clone(),
        candidates: candidates.clone(),
        outcome,
        degraded,
        error: None,
    };
    if candidates.is_empty() {
        return Ok(decision(Outcome::NoMatch, false));
    }
    let mut ctx = required.description.context();
    ctx.insert("name".into(), required.name.clone());
    ctx.insert("prompt".into(), scene_prompt.to_string());
    ctx.insert("candidates".into(), candidate_list(&candidates, manifest));
    let prompt = provider.render_prompt("vote", &ctx).map_err(ProviderError::from)?;
    let request = ProviderRequest::new(RequestKind::Vote, prompt, vec![])?.with_schema(SchemaTag::VoteChoice {
        candidates: candidates.len(),
    });
    match provider.complete(&request) {
        Ok(reply) => match reply.parsed {
            ParsedReply::Vote(VoteChoice::Candidate(i)) => {
                let asset_id = candidates[i - 1].asset_id.clone();
                Ok(decision(Outcome::Selected { asset_id }, false))
            }
            ParsedReply::Vote(VoteChoice::NoMatch) => Ok(decision(Outcome::NoMatch, false)),
            other => unreachable!("vote requests validate to votes, got {other:?}"),
        },
        Err(ProviderError::Validation { raw, .. }) => {
            log::warn!("vote for {:?} unparseable ({raw:?}); taking the top candidate", required.name);
            let asset_id = candidates[0].asset_id.clone();
            Ok(decision(Outcome::Selected { asset_id }, true))
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalOptions {
    pub k: usize,
    pub override_count: Option<usize>,
}

impl Default for RetrievalOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_SHORTLIST_K,
            override_count: None,
        }
    }
}

fn decide(
    required: &RequiredObject,
    scene_prompt: &str,
    manifest: &LibraryManifest,
    index: &VectorIndex,
    provider: &Provider,
    k: usize,
) -> Result<RetrievalDecision, RetrievalError> {
    match shortlist(required, manifest, index, provider, k) {
        Ok(candidates) => vote(required, candidates, scene_prompt, manifest, provider),
        Err(RetrievalError::Provider(e)) if e.is_transport() => Err(e.into()),
        Err(e) => Ok(RetrievalDecision {
            required: required.clone(),
            candidates: vec![],
            outcome: Outcome::NoMatch,
            degraded: false,
            error: Some(e.to_string()),
        }),
    }
}

/// Extracts, shortlists and votes for every object the prompt needs.
///
/// Decisions come back in extraction order, one per object type; counts
/// are expanded into slots by the layout stage. Per-object shortlist
/// failures become `NoMatch` decisions carrying the error. Calls run in
/// parallel except under a scripted provider, whose replies are consumed in
/// call order.
pub fn retrieve_scene_assets(
    scene_prompt: &str,
    manifest: &LibraryManifest,
    index: &VectorIndex,
    provider: &Provider,
    options: &RetrievalOptions,
) -> Result<RetrievalReport, RetrievalError> {
    let (required, mut warnings) = extract_required_objects(scene_prompt, provider, options.override_count)?;
    let run = |r: &RequiredObject| decide(r, scene_prompt, manifest, index, provider, options.k);
    let decisions: Vec<RetrievalDecision> = if provider.is_scripted() {
        required.iter().map(run).collect::<Result<_, _>>()?
    } else {
        required.par_iter().map(run).collect::<Result<_, _>>()?
    };
    for d in &decisions {
        if let Some(e) = &d.error {
            warnings.push(format!("{}: {e}", d.required.name));
        } else if d.selected().is_none() {
            warnings.push(format!("{}: no suitable asset; left out of the scene", d.required.name));
        }
    }
    Ok(RetrievalReport {
        prompt: scene_prompt.to_string(),
        k: options.k,
        decisions,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_provider::{FixtureEntry, ScriptedFixture};

    fn objects_reply(names: &[&str]) -> String {
        let objs: Vec<_> = names
            .iter()
            .map(|n| serde_json::json!({"name": n, "description": {"physical": n, "functional": "x", "contextual": "y"}}))
            .collect();
        format!("```json\n{}\n```", serde_json::json!({ "objects": objs }))
    }

    #[test]
    fn empty_prompt_rejected() {
        let p = Provider::scripted(ScriptedFixture::default());
        assert!(matches!(
            extract_required_objects("  ", &p, None),
            Err(RetrievalError::Precondition(_))
        ));
    }

    #[test]
    fn duplicates_merge() {
        let p = Provider::scripted(ScriptedFixture::new(vec![FixtureEntry::new(
            RequestKind::ExtractObjects,
            [objects_reply(&["chair", "Chair ", "table"])],
        )]));
        let (objs, _) = extract_required_objects("a room", &p, None).unwrap();
        assert_eq!(objs.len(), 2);
        assert_eq!(objs[0].count, 2);
    }

    #[test]
    fn override_count_truncates() {
        let p = Provider::scripted(ScriptedFixture::new(vec![FixtureEntry::new(
            RequestKind::ExtractObjects,
            [objects_reply(&["a", "b", "c"])],
        )]));
        let (objs, warnings) = extract_required_objects("a room", &p, Some(2)).unwrap();
        assert_eq!(objs.len(), 2);
        assert_eq!(warnings.len(), 1);
    }

    fn candidates(n: usize) -> Vec<Candidate> {
        (0..n)
            .map(|i| Candidate {
                asset_id: format!("id{i}"),
                display_name: format!("thing {i}"),
                score: Some(1.0 - i as f64 / 10.0),
            })
            .collect()
    }

    fn required() -> RequiredObject {
        RequiredObject {
            name: "chair".into(),
            count: 1,
            description: TripartiteCaption::new("a", "b", "c"),
        }
    }

    fn vote_with(reply: &str) -> RetrievalDecision {
        let p = Provider::scripted(ScriptedFixture::new(vec![FixtureEntry::new(RequestKind::Vote, [reply])]));
        let m = LibraryManifest::new(1, vec![]);
        vote(&required(), candidates(3), "room", &m, &p).unwrap()
    }

    #[test]
    fn votes() {
        assert_eq!(vote_with("1").selected(), Some("id0"));
        assert_eq!(vote_with("candidate 3").selected(), Some("id2"));
        assert_eq!(vote_with("none").outcome, Outcome::NoMatch);
        let d = vote_with("the blue chair, obviously");
        assert_eq!(d.selected(), Some("id0"));
        assert!(d.degraded);
    }
}
