use super::{Backend, ProviderError, ProviderRequest, RawEmbedding, RawReply, UsageCounters};
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::sync::Mutex;
use std::time::{Duration, Instant};

pub const API_KEY_ENV: &str = "SCENEFORGE_API_KEY";
pub const ENDPOINT_ENV: &str = "SCENEFORGE_ENDPOINT";

/// Settings for an OpenAI-compatible chat/embeddings endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveConfig {
    /// Base URL; `/chat/completions` and `/embeddings` are appended.
    pub endpoint: String,
    #[serde(skip)]
    pub api_key: String,
    pub text_model: String,
    pub vision_model: String,
    pub embedding_model: String,
    pub requests_per_minute: u32,
    pub temperature: f64,
    pub timeout_secs: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".to_string(),
            api_key: String::new(),
            text_model: "gpt-4o".to_string(),
            vision_model: "gpt-4o".to_string(),
            embedding_model: "text-embedding-3-small".to_string(),
            requests_per_minute: 60,
            temperature: 0.0,
            timeout_secs: 300,
        }
    }
}

impl LiveConfig {
    /// Fills credentials (and the endpoint, when set) from the environment.
    pub fn with_env(mut self) -> Result<Self, ProviderError> {
        self.api_key = std::env::var(API_KEY_ENV)
            .map_err(|_| ProviderError::Config(format!("{API_KEY_ENV} is not set")))?;
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            self.endpoint = endpoint;
        }
        Ok(self)
    }
}

/// Token bucket: at most `per_minute` calls per minute, bursting up to the
/// same number.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: f64,
    refill_per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn per_minute(per_minute: u32) -> Self {
        let capacity = per_minute.max(1) as f64;
        Self {
            capacity,
            refill_per_sec: capacity / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Takes one token, returning how long the caller must wait first.
    pub fn reserve(&self) -> Duration {
        let mut state = self.state.lock().expect("rate limiter lock poisoned");
        let now = Instant::now();
        let (tokens, last) = *state;
        let tokens = (tokens + now.duration_since(last).as_secs_f64() * self.refill_per_sec).min(self.capacity) - 1.0;
        *state = (tokens, now);
        if tokens >= 0.0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(-tokens / self.refill_per_sec)
        }
    }

    pub fn acquire(&self) {
        let wait = self.reserve();
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// Backend for a live HTTP endpoint.
#[derive(Debug)]
pub struct LiveBackend {
    config: LiveConfig,
    agent: ureq::Agent,
    limiter: RateLimiter,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build();
        let limiter = RateLimiter::per_minute(config.requests_per_minute);
        Self { config, agent, limiter }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    fn post(&self, path: &str, body: Value) -> Result<Value, ProviderError> {
        self.limiter.acquire();
        let response = self
            .agent
            .post(&self.url(path))
            .set("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(body);
        match response {
            Ok(r) => r
                .into_json::<Value>()
                .map_err(|e| ProviderError::Transport(format!("unreadable response body: {e}"))),
            Err(ureq::Error::Status(code, r)) => {
                let body = r.into_string().unwrap_or_default();
                Err(ProviderError::Transport(format!("HTTP {code}: {}", body.chars().take(500).collect::<String>())))
            }
            Err(e) => Err(ProviderError::Transport(e.to_string())),
        }
    }
}

fn usage_of(v: &Value) -> UsageCounters {
    UsageCounters {
        input_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        output_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
    }
}

fn image_part(path: &std::path::Path) -> Result<Value, ProviderError> {
    let bytes = std::fs::read(path)
        .map_err(|e| ProviderError::Precondition(format!("cannot read image {}: {e}", path.display())))?;
    let b64 = base64::engine::general_purpose::STANDARD.encode(bytes);
    Ok(json!({"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{b64}")}}))
}

impl Backend for LiveBackend {
    fn tag(&self) -> String {
        format!("live:{}", self.config.text_model)
    }

    fn send(&self, request: &ProviderRequest, _attempt: u32) -> Result<RawReply, ProviderError> {
        let model = if request.kind.takes_images() {
            &self.config.vision_model
        } else {
            &self.config.text_model
        };
        let mut content = vec![json!({"type": "text", "text": request.prompt})];
        for img in &request.images {
            content.push(image_part(img)?);
        }
        let body = json!({
            "model": model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": content}],
        });
        let v = self.post("chat/completions", body)?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| ProviderError::Transport("response has no message content".to_string()))?
            .to_string();
        Ok(RawReply {
            text,
            usage: usage_of(&v),
        })
    }

    fn embed(&self, text: &str) -> Result<RawEmbedding, ProviderError> {
        let v = self.post("embeddings", json!({"model": self.config.embedding_model, "input": text}))?;
        let values = v["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| ProviderError::Transport("response has no embedding".to_string()))?
            .iter()
            .map(|x| x.as_f64().map(|f| f as f32))
            .collect::<Option<Vec<f32>>>()
            .ok_or_else(|| ProviderError::Transport("embedding has non-numeric values".to_string()))?;
        Ok(RawEmbedding {
            values,
            usage: usage_of(&v),
        })
    }
}
