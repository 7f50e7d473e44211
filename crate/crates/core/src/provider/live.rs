//! Client for OpenAI-compatible HTTP APIs.
//!
//! Text tasks go to `/chat/completions` with JSON output requested; images to
//! `/images/generations` as base64 PNG; difference scores to
//! `/chat/completions` on the vision model with both images attached.

use std::sync::Arc;

use base64::Engine as _;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::templates::{self, Template};
use super::{
    attributes_json, GeneratedImage, ImageBackend, ImageRequest, ImageStore, ProviderConfig, ProviderError,
    TextBackend, TextTask, VisionBackend,
};
use crate::genome::ImageRef;

const RESPONSE_LIMIT: u64 = 64 * 1024 * 1024;

pub struct LiveBackend {
    agent: ureq::Agent,
    config: ProviderConfig,
    images: Option<Arc<dyn ImageStore>>,
}

impl std::fmt::Debug for LiveBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveBackend").field("config", &self.config).finish()
    }
}

/// Renders the prompt for one text task.
pub fn render_task(task: &TextTask<'_>) -> (Template, String) {
    match *task {
        TextTask::InitialAttributes { prompt } => {
            let t = templates::INITIAL_ATTRIBUTES;
            (t, t.render(&[("user_prompt", prompt.as_str())]))
        }
        TextTask::Blend { key, first, second } => {
            let t = templates::BLEND_ATTRIBUTE;
            (t, t.render(&[("attribute_label", key.label()), ("value_a", first.as_str()), ("value_b", second.as_str())]))
        }
        TextTask::Similarity { key, candidate, reference } => {
            let t = templates::JUDGE_SIMILARITY;
            (
                t,
                t.render(&[
                    ("attribute_label", key.label()),
                    ("candidate", candidate.as_str()),
                    ("reference", reference.as_str()),
                ]),
            )
        }
        TextTask::NovelAlternatives { prompt, context, requests } => {
            let tabu: serde_json::Map<String, Value> = requests
                .iter()
                .map(|(k, values)| (k.as_str().to_string(), json!(values)))
                .collect();
            let t = templates::NOVEL_ALTERNATIVES;
            (
                t,
                t.render(&[
                    ("user_prompt", prompt.as_str()),
                    ("attributes_json", &attributes_json(context)),
                    ("tabu_json", &serde_json::to_string_pretty(&tabu).expect("map serializes")),
                ]),
            )
        }
    }
}

/// Chat content parsed as JSON. Text that is not JSON is passed through as a
/// string so the schema gate rejects it and the gateway retries.
fn parse_content(content: &str) -> Value {
    if let Ok(v) = serde_json::from_str(content) {
        return v;
    }
    if let (Some(start), Some(end)) = (content.find('{'), content.rfind('}')) {
        if start < end {
            if let Ok(v) = serde_json::from_str(&content[start..=end]) {
                return v;
            }
        }
    }
    Value::String(content.to_string())
}

impl LiveBackend {
    pub fn new(config: ProviderConfig, images: Option<Arc<dyn ImageStore>>) -> Result<Self, ProviderError> {
        if config.api_key.is_none() {
            return Err(ProviderError::Config("live backend needs an API key".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.request_timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(LiveBackend { agent, config, images })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.api_base_url.trim_end_matches('/'), path)
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, ProviderError> {
        let key = self.config.api_key.as_deref().unwrap_or_default();
        let mut response = self
            .agent
            .post(&self.url(path))
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(body)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .with_config()
            .limit(RESPONSE_LIMIT)
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if status == 401 || status == 403 {
            return Err(ProviderError::Auth(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            let message = serde_json::from_str::<Value>(&text)
                .ok()
                .and_then(|v| v["error"]["message"].as_str().map(str::to_string))
                .unwrap_or(text);
            return Err(ProviderError::Api { status, message });
        }
        serde_json::from_str(&text).map_err(|e| ProviderError::Transport(format!("response is not JSON: {e}")))
    }

    fn chat_content(response: &Value) -> Result<&str, ProviderError> {
        response["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| ProviderError::MalformedAttributes("completion without message content".into()))
    }

    /// URL the vision model can fetch: remote and data URLs pass through,
    /// cached images are inlined as base64.
    fn resolve(&self, image: &ImageRef) -> Result<String, ProviderError> {
        let uri = image.uri.as_str();
        if uri.starts_with("http://") || uri.starts_with("https://") || uri.starts_with("data:") {
            return Ok(uri.to_string());
        }
        let bytes = image
            .digest
            .as_deref()
            .and_then(|d| self.images.as_ref()?.get(d))
            .ok_or_else(|| ProviderError::Unresolvable(uri.to_string()))?;
        Ok(format!("data:image/png;base64,{}", base64::engine::general_purpose::STANDARD.encode(bytes)))
    }
}

impl TextBackend for LiveBackend {
    fn complete(&self, task: &TextTask<'_>) -> Result<Value, ProviderError> {
        let (_, prompt) = render_task(task);
        let body = json!({
            "model": self.config.text_model,
            "temperature": self.config.temperature,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": templates::SYSTEM.text},
                {"role": "user", "content": prompt},
            ],
        });
        let response = self.post("chat/completions", &body)?;
        match Self::chat_content(&response) {
            Ok(content) => Ok(parse_content(content)),
            // hand the odd shape to the schema gate so it counts as a malformed attempt
            Err(_) => Ok(Value::Null),
        }
    }
}

impl ImageBackend for LiveBackend {
    fn render(&self, request: &ImageRequest<'_>) -> Result<GeneratedImage, ProviderError> {
        let body = json!({
            "model": self.config.image_model,
            "prompt": request.render_prompt(),
            "n": 1,
            "response_format": "b64_json",
        });
        let response = self.post("images/generations", &body)?;
        let item = &response["data"][0];
        let description = item["revised_prompt"].as_str().unwrap_or_default().to_string();
        if let Some(b64) = item["b64_json"].as_str() {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(b64)
                .map_err(|e| ProviderError::MalformedAttributes(format!("image payload: {e}")))?;
            let digest = hex::encode(Sha256::digest(&bytes).as_slice());
            return Ok(GeneratedImage {
                image: ImageRef { uri: format!("images/{digest}.png"), digest: Some(digest) },
                description,
                bytes: Some(bytes),
            });
        }
        if let Some(url) = item["url"].as_str() {
            return Ok(GeneratedImage {
                image: ImageRef { uri: url.to_string(), digest: None },
                description,
                bytes: None,
            });
        }
        Err(ProviderError::MalformedAttributes("image response without data".into()))
    }
}

impl VisionBackend for LiveBackend {
    fn difference(&self, a: &ImageRef, b: &ImageRef) -> Result<Value, ProviderError> {
        let body = json!({
            "model": self.config.vision_model,
            "max_tokens": 300,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": templates::DIFFERENCE_SCORE.text},
                    {"type": "image_url", "image_url": {"url": self.resolve(a)?}},
                    {"type": "image_url", "image_url": {"url": self.resolve(b)?}},
                ],
            }],
        });
        let response = self.post("chat/completions", &body)?;
        Ok(Self::chat_content(&response).map(parse_content).unwrap_or(Value::Null))
    }
}
