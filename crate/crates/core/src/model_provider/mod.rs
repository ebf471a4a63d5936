//! Gateway to text, vision and embedding models.
//!
//! Every model call in the pipeline goes through [`Provider::complete`]:
//! the prompt is rendered from a template file, sent to a [`Backend`], and
//! the reply is validated against the request's [`SchemaTag`]. Replies that
//! fail validation are retried with a repair message appended, up to
//! [`Provider::retries`] times. Only validated [`ParsedReply`] values reach
//! the rest of the crate.
//!
//! Two backends ship with the crate: [`ScriptedBackend`] replays a
//! [`ScriptedFixture`] and needs no network, and [`LiveBackend`] talks to an
//! OpenAI-compatible HTTP endpoint.

mod frame;
mod live;
pub mod parse;
mod schema;
mod scripted;
mod template;

pub use frame::PromptFrame;
pub use live::{LiveBackend, LiveConfig, RateLimiter, API_KEY_ENV, ENDPOINT_ENV};
pub use schema::SchemaRegistry;
pub use scripted::{hash_embedding, FixtureEntry, ScriptedBackend, ScriptedFixture, DEFAULT_SCRIPTED_DIM};
pub use template::{PromptLibrary, TemplateError, PROMPT_LIBRARY_VERSION};

use crate::asset_library::TripartiteCaption;
use parse::VoteChoice;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

/// What a model call is for. Each kind has its own template and reply shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Caption,
    Orient,
    ExtractObjects,
    Vote,
    ExtractConstraints,
    Order,
    Place,
    Refine,
    Embed,
}

impl RequestKind {
    pub const ALL: [RequestKind; 9] = [
        RequestKind::Caption,
        RequestKind::Orient,
        RequestKind::ExtractObjects,
        RequestKind::Vote,
        RequestKind::ExtractConstraints,
        RequestKind::Order,
        RequestKind::Place,
        RequestKind::Refine,
        RequestKind::Embed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RequestKind::Caption => "caption",
            RequestKind::Orient => "orient",
            RequestKind::ExtractObjects => "extract_objects",
            RequestKind::Vote => "vote",
            RequestKind::ExtractConstraints => "extract_constraints",
            RequestKind::Order => "order",
            RequestKind::Place => "place",
            RequestKind::Refine => "refine",
            RequestKind::Embed => "embed",
        }
    }

    /// Vision requests carry rendered views.
    pub fn takes_images(&self) -> bool {
        matches!(self, RequestKind::Caption | RequestKind::Orient)
    }

    /// Requests issued while ingesting assets (possibly concurrently).
    pub fn is_ingest(&self) -> bool {
        matches!(self, RequestKind::Caption | RequestKind::Orient | RequestKind::Embed)
    }

    /// The reply shape a request of this kind is validated against.
    pub fn default_schema(&self) -> SchemaTag {
        match self {
            RequestKind::Caption => SchemaTag::TripartiteText,
            RequestKind::Orient => SchemaTag::ViewIndex,
            RequestKind::Vote => SchemaTag::VoteChoice { candidates: 5 },
            RequestKind::Embed => SchemaTag::Embedding,
            RequestKind::ExtractObjects
            | RequestKind::ExtractConstraints
            | RequestKind::Order
            | RequestKind::Place
            | RequestKind::Refine => SchemaTag::Json(*self),
        }
    }
}

impl std::fmt::Display for RequestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RequestKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RequestKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown request kind {s:?}"))
    }
}

/// Expected reply shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum SchemaTag {
    /// Free text with physical, functional and contextual sections.
    TripartiteText,
    /// An image number between 1 and 4.
    ViewIndex,
    /// A candidate number between 1 and `candidates`, or "none".
    VoteChoice { candidates: usize },
    /// A fenced JSON block validated against `schemas/<kind>.json`.
    Json(RequestKind),
    /// A dense vector.
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub kind: RequestKind,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<PathBuf>,
    pub schema_tag: SchemaTag,
}

impl ProviderRequest {
    /// Builds a request with the kind's default schema. Images are required
    /// for vision kinds and rejected otherwise.
    pub fn new(kind: RequestKind, prompt: String, images: Vec<PathBuf>) -> Result<Self, ProviderError> {
        if kind.takes_images() == images.is_empty() {
            return Err(ProviderError::Precondition(format!(
                "{kind} requests {} images",
                if kind.takes_images() { "require" } else { "take no" }
            )));
        }
        Ok(Self {
            kind,
            prompt,
            images,
            schema_tag: kind.default_schema(),
        })
    }

    pub fn with_schema(mut self, tag: SchemaTag) -> Self {
        self.schema_tag = tag;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageCounters {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl UsageCounters {
    /// Usage accrued since `earlier` was read.
    pub fn minus(&self, earlier: &UsageCounters) -> UsageCounters {
        UsageCounters {
            input_tokens: self.input_tokens.saturating_sub(earlier.input_tokens),
            output_tokens: self.output_tokens.saturating_sub(earlier.output_tokens),
        }
    }
}

impl std::ops::AddAssign for UsageCounters {
    fn add_assign(&mut self, o: Self) {
        self.input_tokens += o.input_tokens;
        self.output_tokens += o.output_tokens;
    }
}

/// A validated reply value.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedReply {
    Caption(TripartiteCaption),
    ViewIndex(u8),
    Vote(VoteChoice),
    Json(Value),
    Embedding(Vec<f32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderReply {
    pub kind: RequestKind,
    /// Raw text of the reply that passed validation.
    pub text: String,
    pub parsed: ParsedReply,
    /// Usage summed over all attempts of this call.
    pub usage: UsageCounters,
    /// 1 when the first reply validated.
    pub attempts: u32,
    /// The prompt of the final attempt.
    pub prompt: String,
}

impl ProviderReply {
    /// Deserializes a JSON reply into a typed value.
    ///
    /// Use [`json_check`] with [`Provider::complete_checked`] so that replies
    /// which do not decode are retried.
    pub fn json<T: serde::de::DeserializeOwned>(&self) -> Result<T, ProviderError> {
        match &self.parsed {
            ParsedReply::Json(v) => serde_json::from_value(v.clone()).map_err(|e| ProviderError::Validation {
                kind: self.kind,
                reason: format!("schema-valid reply did not decode: {e}"),
                raw: self.text.clone(),
                attempts: self.attempts,
            }),
            other => Err(ProviderError::Precondition(format!("reply is not JSON: {other:?}"))),
        }
    }
}

/// Raw backend output before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawReply {
    pub text: String,
    pub usage: UsageCounters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawEmbedding {
    pub values: Vec<f32>,
    pub usage: UsageCounters,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    /// The backend could not be reached or refused the call.
    #[error("transport error: {0}")]
    Transport(String),
    /// Every attempt produced a reply that failed validation.
    #[error("{kind} reply failed validation after {attempts} attempt(s): {reason}")]
    Validation {
        kind: RequestKind,
        reason: String,
        raw: String,
        attempts: u32,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl ProviderError {
    pub fn is_transport(&self) -> bool {
        matches!(self, ProviderError::Transport(_))
    }
}

/// Something that turns prompts into raw replies.
pub trait Backend: Send + Sync {
    /// Identifies the backend and model, recorded in outputs.
    fn tag(&self) -> String;

    /// `attempt` counts from 0 and grows on repair retries.
    fn send(&self, request: &ProviderRequest, attempt: u32) -> Result<RawReply, ProviderError>;

    fn embed(&self, text: &str) -> Result<RawEmbedding, ProviderError>;

    /// True when the backend is fully deterministic and offline.
    fn is_scripted(&self) -> bool {
        false
    }
}

#[derive(Serialize)]
struct UsageLogLine<'a> {
    kind: &'a str,
    input_tokens: u64,
    output_tokens: u64,
    latency_ms: u128,
    attempts: u32,
    ok: bool,
}

/// Default number of repair retries after the first attempt.
pub const DEFAULT_RETRIES: u32 = 2;

/// Template rendering, validation, retries and usage accounting around a
/// [`Backend`]. Shareable across threads.
pub struct Provider {
    backend: Box<dyn Backend>,
    templates: PromptLibrary,
    schemas: SchemaRegistry,
    retries: u32,
    frame: PromptFrame,
    usage: Mutex<UsageCounters>,
    usage_log: Option<Mutex<File>>,
}

impl std::fmt::Debug for Provider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Provider")
            .field("backend", &self.backend.tag())
            .field("retries", &self.retries)
            .field("frame", &self.frame)
            .finish()
    }
}

impl Provider {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Self {
            backend,
            templates: PromptLibrary::builtin(),
            schemas: SchemaRegistry::builtin(),
            retries: DEFAULT_RETRIES,
            frame: PromptFrame::default(),
            usage: Mutex::new(UsageCounters::default()),
            usage_log: None,
        }
    }

    /// Offline provider replaying `fixture`.
    pub fn scripted(fixture: ScriptedFixture) -> Self {
        Self::new(Box::new(ScriptedBackend::new(fixture)))
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_frame(mut self, frame: PromptFrame) -> Self {
        self.frame = frame;
        self
    }

    pub fn with_templates(mut self, templates: PromptLibrary) -> Self {
        self.templates = templates;
        self
    }

    /// Appends one JSON line per call to `path`.
    pub fn with_usage_log(mut self, path: &Path) -> Result<Self, ProviderError> {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| ProviderError::Config(format!("cannot open usage log {}: {e}", path.display())))?;
        self.usage_log = Some(Mutex::new(file));
        Ok(self)
    }

    pub fn retries(&self) -> u32 {
        self.retries
    }

    pub fn frame(&self) -> PromptFrame {
        self.frame
    }

    pub fn tag(&self) -> String {
        self.backend.tag()
    }

    pub fn is_scripted(&self) -> bool {
        self.backend.is_scripted()
    }

    pub fn templates(&self) -> &PromptLibrary {
        &self.templates
    }

    /// Usage accumulated over every call made through this provider.
    pub fn usage(&self) -> UsageCounters {
        *self.usage.lock().expect("usage lock poisoned")
    }

    pub fn render_prompt(&self, template: &str, context: &BTreeMap<String, String>) -> Result<String, TemplateError> {
        self.templates.render(template, context)
    }

    /// Sends a request and returns the first reply that validates.
    pub fn complete(&self, request: &ProviderRequest) -> Result<ProviderReply, ProviderError> {
        self.complete_checked(request, |_| Ok(()))
    }

    /// Like [`Provider::complete`], with an extra check run on each parsed
    /// reply; a failed check triggers a repair retry like a schema failure.
    pub fn complete_checked<F>(&self, request: &ProviderRequest, check: F) -> Result<ProviderReply, ProviderError>
    where
        F: Fn(&ParsedReply) -> Result<(), String>,
    {
        if request.kind.takes_images() == request.images.is_empty() {
            return Err(ProviderError::Precondition(format!(
                "{} request has wrong image set ({} images)",
                request.kind,
                request.images.len()
            )));
        }
        let started = Instant::now();
        let mut total = UsageCounters::default();
        let mut current = request.clone();
        let mut last_error = String::new();
        let mut last_raw = String::new();
        let max_attempts = self.retries + 1;
        for attempt in 0..max_attempts {
            let raw = match self.backend.send(&current, attempt) {
                Ok(raw) => raw,
                Err(e) => {
                    self.account(request.kind, total, started, attempt + 1, false);
                    return Err(e);
                }
            };
            total += raw.usage;
            match self.validate(&request.schema_tag, &raw.text).and_then(|p| check(&p).map(|_| p)) {
                Ok(parsed) => {
                    self.account(request.kind, total, started, attempt + 1, true);
                    return Ok(ProviderReply {
                        kind: request.kind,
                        text: raw.text,
                        parsed,
                        usage: total,
                        attempts: attempt + 1,
                        prompt: current.prompt,
                    });
                }
                Err(reason) => {
                    log::debug!("{} reply rejected on attempt {}: {reason}", request.kind, attempt + 1);
                    let mut ctx = BTreeMap::new();
                    ctx.insert("original".to_string(), request.prompt.clone());
                    ctx.insert("error".to_string(), reason.clone());
                    ctx.insert("reply".to_string(), raw.text.clone());
                    current.prompt = self.templates.render("repair", &ctx)?;
                    last_error = reason;
                    last_raw = raw.text;
                }
            }
        }
        self.account(request.kind, total, started, max_attempts, false);
        Err(ProviderError::Validation {
            kind: request.kind,
            reason: last_error,
            raw: last_raw,
            attempts: max_attempts,
        })
    }

    /// Embeds a document. Vectors must be finite and not all zero.
    pub fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let started = Instant::now();
        let mut last = String::new();
        for attempt in 0..=self.retries {
            let raw = self.backend.embed(text)?;
            match check_embedding(&raw.values) {
                Ok(()) => {
                    self.account(RequestKind::Embed, raw.usage, started, attempt + 1, true);
                    return Ok(raw.values);
                }
                Err(reason) => last = reason,
            }
        }
        self.account(RequestKind::Embed, UsageCounters::default(), started, self.retries + 1, false);
        Err(ProviderError::Validation {
            kind: RequestKind::Embed,
            reason: last,
            raw: String::new(),
            attempts: self.retries + 1,
        })
    }

    fn validate(&self, tag: &SchemaTag, text: &str) -> Result<ParsedReply, String> {
        match tag {
            SchemaTag::TripartiteText => crate::asset_library::parse_caption(text)
                .map(ParsedReply::Caption)
                .map_err(|e| e.to_string()),
            SchemaTag::ViewIndex => parse::parse_index(text, 4)
                .map(|i| ParsedReply::ViewIndex(i as u8))
                .ok_or_else(|| "expected an image number between 1 and 4".to_string()),
            SchemaTag::VoteChoice { candidates } => parse::parse_vote(text, *candidates)
                .map(ParsedReply::Vote)
                .ok_or_else(|| format!("expected a candidate number between 1 and {candidates}, or \"none\"")),
            SchemaTag::Json(kind) => {
                let value = parse::extract_json(text).ok_or_else(|| "no JSON object found in reply".to_string())?;
                self.schemas.validate(*kind, &value)?;
                Ok(ParsedReply::Json(value))
            }
            SchemaTag::Embedding => {
                let values: Vec<f32> = serde_json::from_str(text.trim()).map_err(|e| e.to_string())?;
                check_embedding(&values)?;
                Ok(ParsedReply::Embedding(values))
            }
        }
    }

    fn account(&self, kind: RequestKind, usage: UsageCounters, started: Instant, attempts: u32, ok: bool) {
        *self.usage.lock().expect("usage lock poisoned") += usage;
        if let Some(log) = &self.usage_log {
            let line = UsageLogLine {
                kind: kind.as_str(),
                input_tokens: usage.input_tokens,
                output_tokens: usage.output_tokens,
                latency_ms: started.elapsed().as_millis(),
                attempts,
                ok,
            };
            let mut file = log.lock().expect("usage log lock poisoned");
            if let Ok(s) = serde_json::to_string(&line) {
                if let Err(e) = writeln!(file, "{s}") {
                    log::warn!("usage log write failed: {e}");
                }
            }
        }
    }
}

/// A reply check that the JSON payload decodes as `T`.
pub fn json_check<T: serde::de::DeserializeOwned>(parsed: &ParsedReply) -> Result<(), String> {
    match parsed {
        ParsedReply::Json(v) => T::deserialize(v).map(|_| ()).map_err(|e| e.to_string()),
        _ => Err("reply is not JSON".to_string()),
    }
}

fn check_embedding(values: &[f32]) -> Result<(), String> {
    if values.is_empty() {
        return Err("empty embedding".into());
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err("embedding has non-finite values".into());
    }
    if values.iter().all(|v| *v == 0.0) {
        return Err("embedding is all zeros".into());
    }
    Ok(())
}
