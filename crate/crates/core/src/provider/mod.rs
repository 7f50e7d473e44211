//! Uniform access to text generation, image generation and image scoring.
//!
//! Backends ([`TextBackend`], [`ImageBackend`], [`VisionBackend`]) only move
//! JSON. The [`Gateway`] owns retries, schema validation and the image rate
//! limit, so nothing malformed reaches the evolution engine regardless of
//! which backend is plugged in.

mod images;
pub mod live;
pub mod mock;
pub mod rate_limit;
pub mod schema;
pub mod scripted;
pub mod templates;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::genome::{AttributeKey, AttributeMap, AttributeValue, ImageRef, InitialPrompt};

pub use images::{DirImageStore, ImageStore, MemoryImageStore};
pub use live::LiveBackend;
pub use mock::{MockBackend, MockFixtures};
pub use rate_limit::{Clock, ManualClock, RateLimiter, SystemClock};
use schema::Rejection;

pub const ENV_API_KEY: &str = "EVOSCAPE_API_KEY";
pub const ENV_API_BASE: &str = "EVOSCAPE_API_BASE";
pub const ENV_BACKEND: &str = "EVOSCAPE_BACKEND";
pub const ENV_SEED: &str = "EVOSCAPE_SEED";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("provider returned HTTP {status}: {message}")]
    Api { status: u16, message: String },
    #[error("malformed provider output: {0}")]
    MalformedAttributes(String),
    #[error("provider kept returning tabu value {value:?} for {key}")]
    TabuViolation { key: AttributeKey, value: String },
    #[error("no image-generation permit within {0:?}")]
    RateLimitTimeout(Duration),
    #[error("image cannot be resolved: {0}")]
    Unresolvable(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

impl ProviderError {
    /// Transport hiccups, throttling and server errors are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport(_) => true,
            ProviderError::Api { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Live,
    Mock,
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(Backend::Live),
            "mock" => Ok(Backend::Mock),
            other => Err(format!("unknown backend `{other}` (expected live or mock)")),
        }
    }
}

#[derive(Clone)]
pub struct ProviderConfig {
    pub backend: Backend,
    pub api_base_url: String,
    /// Read from the environment only; never serialized.
    pub api_key: Option<String>,
    pub text_model: String,
    pub temperature: f32,
    pub image_model: String,
    pub vision_model: String,
    pub request_timeout: Duration,
    pub max_retries: u32,
    pub retry_backoff: Duration,
}

impl fmt::Debug for ProviderConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProviderConfig")
            .field("backend", &self.backend)
            .field("api_base_url", &self.api_base_url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("text_model", &self.text_model)
            .field("temperature", &self.temperature)
            .field("image_model", &self.image_model)
            .field("vision_model", &self.vision_model)
            .field("request_timeout", &self.request_timeout)
            .field("max_retries", &self.max_retries)
            .finish()
    }
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            backend: Backend::Mock,
            api_base_url: "https://api.openai.com/v1".into(),
            api_key: None,
            text_model: "gpt-4-1106-preview".into(),
            temperature: 0.9,
            image_model: "dall-e-3".into(),
            vision_model: "gpt-4-vision-preview".into(),
            request_timeout: Duration::from_secs(120),
            max_retries: 3,
            retry_backoff: Duration::from_millis(500),
        }
    }
}

impl ProviderConfig {
    /// Defaults overridden by `EVOSCAPE_*` environment variables.
    pub fn from_env() -> Result<Self, ProviderError> {
        let mut config = ProviderConfig::default();
        if let Ok(backend) = std::env::var(ENV_BACKEND) {
            config.backend = backend.parse().map_err(ProviderError::Config)?;
        }
        if let Ok(base) = std::env::var(ENV_API_BASE) {
            config.api_base_url = base;
        }
        config.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_retries < 1 {
            return Err(ProviderError::Config("max_retries must be at least 1".into()));
        }
        if self.backend == Backend::Live && self.api_key.is_none() {
            return Err(ProviderError::Config(format!("live backend needs {ENV_API_KEY}")));
        }
        Ok(())
    }
}

/// Reads `EVOSCAPE_SEED` when set.
pub fn seed_from_env() -> Option<u64> {
    std::env::var(ENV_SEED).ok().and_then(|s| s.parse().ok())
}

/// One text-generation request. Backends answer with a JSON document whose
/// shape is checked by [`schema`].
#[derive(Debug, Clone, Copy)]
pub enum TextTask<'a> {
    InitialAttributes {
        prompt: &'a InitialPrompt,
    },
    Blend {
        key: AttributeKey,
        first: &'a AttributeValue,
        second: &'a AttributeValue,
    },
    Similarity {
        key: AttributeKey,
        candidate: &'a AttributeValue,
        reference: &'a AttributeValue,
    },
    NovelAlternatives {
        prompt: &'a InitialPrompt,
        context: &'a AttributeMap,
        requests: &'a BTreeMap<AttributeKey, Vec<AttributeValue>>,
    },
}

impl TextTask<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            TextTask::InitialAttributes { .. } => "initial_attributes",
            TextTask::Blend { .. } => "blend_attribute",
            TextTask::Similarity { .. } => "judge_similarity",
            TextTask::NovelAlternatives { .. } => "novel_alternatives",
        }
    }
}

/// What to render. `attributes` is `None` for raw-prompt baseline images,
/// in which case `variant` distinguishes repeated requests.
#[derive(Debug, Clone, Copy)]
pub struct ImageRequest<'a> {
    pub prompt: &'a InitialPrompt,
    pub attributes: Option<&'a AttributeMap>,
    pub variant: u32,
}

impl ImageRequest<'_> {
    /// Text handed to the image model.
    pub fn render_prompt(&self) -> String {
        match self.attributes {
            Some(attrs) => templates::IMAGE_PROMPT.render(&[
                ("user_prompt", self.prompt.as_str()),
                ("attributes_json", &attributes_json(attrs)),
            ]),
            None => self.prompt.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedImage {
    pub image: ImageRef,
    pub description: String,
    pub bytes: Option<Vec<u8>>,
}

pub trait TextBackend: Send + Sync {
    fn complete(&self, task: &TextTask<'_>) -> Result<Value, ProviderError>;
}

pub trait ImageBackend: Send + Sync {
    fn render(&self, request: &ImageRequest<'_>) -> Result<GeneratedImage, ProviderError>;
}

pub trait VisionBackend: Send + Sync {
    fn difference(&self, a: &ImageRef, b: &ImageRef) -> Result<Value, ProviderError>;
}

/// Pretty JSON object of an attribute map, keyed by attribute name.
pub fn attributes_json(attrs: &AttributeMap) -> String {
    let obj: serde_json::Map<String, Value> =
        attrs.iter().map(|(k, v)| (k.as_str().to_string(), Value::String(v.to_string()))).collect();
    serde_json::to_string_pretty(&obj).expect("string map serializes")
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff: Duration,
    /// Longest wait for an image-generation permit.
    pub permit_timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, backoff: Duration::ZERO, permit_timeout: Duration::from_secs(300) }
    }
}

impl From<&ProviderConfig> for RetryPolicy {
    fn from(config: &ProviderConfig) -> Self {
        RetryPolicy {
            max_attempts: config.max_retries.max(1),
            backoff: config.retry_backoff,
            permit_timeout: config.request_timeout,
        }
    }
}

#[derive(Clone)]
pub struct Gateway {
    text: Arc<dyn TextBackend>,
    images: Arc<dyn ImageBackend>,
    vision: Arc<dyn VisionBackend>,
    limiter: Arc<RateLimiter>,
    image_store: Option<Arc<dyn ImageStore>>,
    retry: RetryPolicy,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway").field("limiter", &self.limiter).field("retry", &self.retry).finish()
    }
}

impl Gateway {
    pub fn new(
        text: Arc<dyn TextBackend>,
        images: Arc<dyn ImageBackend>,
        vision: Arc<dyn VisionBackend>,
        limiter: Arc<RateLimiter>,
        retry: RetryPolicy,
    ) -> Self {
        Gateway { text, images, vision, limiter, image_store: None, retry }
    }

    /// Deterministic offline gateway with no image rate limit.
    pub fn mock(seed: u64, fixtures: MockFixtures) -> Self {
        let backend = Arc::new(MockBackend::new(seed, fixtures));
        Gateway::new(
            backend.clone(),
            backend.clone(),
            backend,
            Arc::new(RateLimiter::unlimited()),
            RetryPolicy::default(),
        )
    }

    /// Builds the gateway described by `config`. `limiter` defaults to five
    /// images per minute for live backends and no limit for the mock.
    pub fn from_config(
        config: &ProviderConfig,
        seed: u64,
        fixtures: Option<MockFixtures>,
        limiter: Option<Arc<RateLimiter>>,
        image_store: Option<Arc<dyn ImageStore>>,
    ) -> Result<Self, ProviderError> {
        config.validate()?;
        let gateway = match config.backend {
            Backend::Mock => {
                let fixtures = fixtures.unwrap_or_else(MockFixtures::builtin);
                let mut g = Gateway::mock(seed, fixtures);
                g.retry = RetryPolicy { backoff: Duration::ZERO, ..RetryPolicy::from(config) };
                if let Some(limiter) = limiter {
                    g.limiter = limiter;
                }
                g
            }
            Backend::Live => {
                let backend = Arc::new(LiveBackend::new(config.clone(), image_store.clone())?);
                Gateway::new(
                    backend.clone(),
                    backend.clone(),
                    backend,
                    limiter.unwrap_or_else(|| Arc::new(RateLimiter::images_per_minute())),
                    RetryPolicy::from(config),
                )
            }
        };
        Ok(match image_store {
            Some(store) => gateway.with_image_store(store),
            None => gateway,
        })
    }

    pub fn with_limiter(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = limiter;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Generated image bytes are written here, keyed by digest.
    pub fn with_image_store(mut self, store: Arc<dyn ImageStore>) -> Self {
        self.image_store = Some(store);
        self
    }

    pub fn limiter(&self) -> &Arc<RateLimiter> {
        &self.limiter
    }

    fn attempt<T>(
        &self,
        mut call: impl FnMut() -> Result<Value, ProviderError>,
        mut validate: impl FnMut(&Value) -> Result<T, Rejection>,
    ) -> Result<T, ProviderError> {
        let mut last = ProviderError::MalformedAttributes("no attempt made".into());
        for attempt in 0..self.retry.max_attempts {
            if attempt > 0 && !self.retry.backoff.is_zero() {
                std::thread::sleep(self.retry.backoff * attempt);
            }
            match call() {
                Ok(payload) => match validate(&payload) {
                    Ok(value) => return Ok(value),
                    Err(Rejection::Malformed(msg)) => last = ProviderError::MalformedAttributes(msg),
                    Err(Rejection::Tabu { key, value }) => last = ProviderError::TabuViolation { key, value },
                },
                Err(e) if e.is_retryable() => last = e,
                Err(e) => return Err(e),
            }
        }
        Err(last)
    }

    /// Four key-complete attribute maps for a new session.
    pub fn generate_initial_attributes(&self, prompt: &InitialPrompt) -> Result<Vec<AttributeMap>, ProviderError> {
        let task = TextTask::InitialAttributes { prompt };
        self.attempt(|| self.text.complete(&task), schema::initial_attributes)
    }

    /// A value combining ideas from both inputs.
    pub fn blend_attribute(
        &self,
        key: AttributeKey,
        first: &AttributeValue,
        second: &AttributeValue,
    ) -> Result<AttributeValue, ProviderError> {
        let task = TextTask::Blend { key, first, second };
        self.attempt(|| self.text.complete(&task), schema::blend)
    }

    /// Exact (case-insensitive, trimmed) equality answers `true` without a
    /// provider call.
    pub fn judge_similarity(
        &self,
        key: AttributeKey,
        candidate: &AttributeValue,
        reference: &AttributeValue,
    ) -> Result<bool, ProviderError> {
        if candidate.matches(reference.as_str()) {
            return Ok(true);
        }
        let task = TextTask::Similarity { key, candidate, reference };
        self.attempt(|| self.text.complete(&task), schema::similarity)
    }

    /// One replacement per requested key, none equal to that key's listed
    /// tabu values. A single backend call covers the whole request.
    pub fn novel_alternatives(
        &self,
        prompt: &InitialPrompt,
        context: &AttributeMap,
        requests: &BTreeMap<AttributeKey, Vec<AttributeValue>>,
    ) -> Result<BTreeMap<AttributeKey, AttributeValue>, ProviderError> {
        if requests.is_empty() {
            return Ok(BTreeMap::new());
        }
        let task = TextTask::NovelAlternatives { prompt, context, requests };
        self.attempt(|| self.text.complete(&task), |v| schema::alternatives(v, requests))
    }

    /// Renders one individual. Waits for a rate-limit permit first.
    pub fn generate_image(&self, prompt: &InitialPrompt, attributes: &AttributeMap) -> Result<GeneratedImage, ProviderError> {
        self.render(&ImageRequest { prompt, attributes: Some(attributes), variant: 0 })
    }

    /// Renders the raw prompt with no attributes, as a plain text-to-image
    /// call would. `variant` separates repeated calls.
    pub fn generate_baseline_image(&self, prompt: &InitialPrompt, variant: u32) -> Result<GeneratedImage, ProviderError> {
        self.render(&ImageRequest { prompt, attributes: None, variant })
    }

    fn render(&self, request: &ImageRequest<'_>) -> Result<GeneratedImage, ProviderError> {
        let mut last = ProviderError::Transport("no attempt made".into());
        for attempt in 0..self.retry.max_attempts {
            if attempt > 0 && !self.retry.backoff.is_zero() {
                std::thread::sleep(self.retry.backoff * attempt);
            }
            self.limiter.acquire(self.retry.permit_timeout)?;
            match self.images.render(request) {
                Ok(generated) if generated.image.uri.is_empty() => {
                    last = ProviderError::MalformedAttributes("image without a reference".into());
                }
                Ok(generated) => {
                    if let (Some(store), Some(digest), Some(bytes)) =
                        (&self.image_store, &generated.image.digest, &generated.bytes)
                    {
                        store.put(digest, bytes)?;
                    }
                    return Ok(generated);
                }
                Err(e) if e.is_retryable() => last = e,
                Err(e) => return Err(e),
            }
        }
        Err(last)
    }

    /// Dissimilarity of two images in `[0, 10]`. Identical references score 0.
    pub fn score_image_difference(&self, a: &ImageRef, b: &ImageRef) -> Result<f64, ProviderError> {
        if a.identity() == b.identity() {
            return Ok(0.0);
        }
        self.attempt(|| self.vision.difference(a, b), schema::difference_score)
    }
}
