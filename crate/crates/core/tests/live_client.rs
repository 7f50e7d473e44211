//! The live backend against a local stand-in for an OpenAI-compatible API.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode, Uri};
use axum::response::IntoResponse;
use axum::{Json, Router};
use base64::Engine as _;
use evoscape_core::genome::validate_initial_prompt;
use evoscape_core::provider::{Backend, MemoryImageStore, ProviderConfig, RateLimiter};
use evoscape_core::{AttributeKey, AttributeMap, AttributeValue, Gateway, ImageRef, ProviderError};
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Recorded {
    path: String,
    authorization: Option<String>,
    body: Value,
}

#[derive(Default)]
struct Fake {
    replies: Mutex<VecDeque<(u16, Value)>>,
    requests: Mutex<Vec<Recorded>>,
}

async fn answer(State(fake): State<Arc<Fake>>, uri: Uri, headers: HeaderMap, Json(body): Json<Value>) -> impl IntoResponse {
    fake.requests.lock().unwrap().push(Recorded {
        path: uri.path().to_string(),
        authorization: headers.get("authorization").and_then(|v| v.to_str().ok()).map(str::to_string),
        body,
    });
    let (status, reply) = fake.replies.lock().unwrap().pop_front().unwrap_or((500, json!({"error": {"message": "script exhausted"}})));
    (StatusCode::from_u16(status).unwrap(), Json(reply))
}

struct Server {
    fake: Arc<Fake>,
    base: String,
    _runtime: tokio::runtime::Runtime,
}

impl Server {
    fn start() -> Self {
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(1).enable_all().build().unwrap();
        let fake = Arc::new(Fake::default());
        let app = Router::new().fallback(answer).with_state(fake.clone());
        let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let base = format!("http://{}/v1", listener.local_addr().unwrap());
        runtime.spawn(async move { axum::serve(listener, app).await.unwrap() });
        Server { fake, base, _runtime: runtime }
    }

    fn reply(&self, status: u16, body: Value) -> &Self {
        self.fake.replies.lock().unwrap().push_back((status, body));
        self
    }

    fn chat(&self, content: Value) -> &Self {
        let text = if content.is_string() { content.as_str().unwrap().to_string() } else { content.to_string() };
        self.reply(200, json!({"choices": [{"message": {"role": "assistant", "content": text}}]}))
    }

    fn requests(&self) -> Vec<Recorded> {
        self.fake.requests.lock().unwrap().clone()
    }

    fn gateway(&self) -> (Gateway, Arc<MemoryImageStore>) {
        let config = ProviderConfig {
            backend: Backend::Live,
            api_base_url: self.base.clone(),
            api_key: Some("test-key".into()),
            request_timeout: Duration::from_secs(10),
            retry_backoff: Duration::ZERO,
            ..ProviderConfig::default()
        };
        let store = Arc::new(MemoryImageStore::default());
        let gateway =
            Gateway::from_config(&config, 0, None, Some(Arc::new(RateLimiter::unlimited())), Some(store.clone())).unwrap();
        (gateway, store)
    }
}

fn individual(site: &str) -> Value {
    json!({
        "architectural_style": "Traditional Malay",
        "site": site,
        "colors": "Natural wood, Red, Yellow",
        "lighting": "Sunlight, torches",
        "shape_form": "Elevated stilts, Long house",
        "materials": "Wood, bamboo, thatch",
    })
}

fn v(s: &str) -> AttributeValue {
    AttributeValue::new(s).unwrap()
}

#[test]
fn initial_attributes_use_json_chat_and_retry_on_missing_keys() {
    let server = Server::start();
    let mut five = individual("Rural village");
    five.as_object_mut().unwrap().remove("materials");
    server
        .chat(json!({"individuals": [five, individual("a"), individual("b"), individual("c")]}))
        .chat(json!({"individuals": [individual("Rural village"), individual("Riverside"), individual("Hill"), individual("Coast")]}));
    let (gateway, _) = server.gateway();
    let maps = gateway.generate_initial_attributes(&validate_initial_prompt("malaysian longhouse").unwrap()).unwrap();
    assert_eq!(maps.len(), 4);
    assert_eq!(maps[0].get(AttributeKey::Site).as_str(), "Rural village");
    assert_eq!(maps[0].get(AttributeKey::Materials).as_str(), "Wood, bamboo, thatch");

    let requests = server.requests();
    assert_eq!(requests.len(), 2);
    let first = &requests[0];
    assert_eq!(first.path, "/v1/chat/completions");
    assert_eq!(first.authorization.as_deref(), Some("Bearer test-key"));
    assert_eq!(first.body["model"], "gpt-4-1106-preview");
    assert!((first.body["temperature"].as_f64().unwrap() - 0.9).abs() < 1e-6);
    assert_eq!(first.body["response_format"]["type"], "json_object");
    let user = first.body["messages"][1]["content"].as_str().unwrap();
    assert!(user.contains("\"malaysian longhouse\""));
    assert!(!user.contains("{user_prompt}"));
}

#[test]
fn malformed_output_three_times_is_an_error() {
    let server = Server::start();
    server.chat(json!("I cannot help with that")).chat(json!({"value": ""})).chat(json!({"blend": "x"}));
    let (gateway, _) = server.gateway();
    let err = gateway.blend_attribute(AttributeKey::Colors, &v("Red"), &v("Blue")).unwrap_err();
    assert!(matches!(err, ProviderError::MalformedAttributes(_)), "{err:?}");
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn auth_failures_are_not_retried_but_server_errors_are() {
    let server = Server::start();
    server.reply(401, json!({"error": {"message": "bad key"}}));
    let (gateway, _) = server.gateway();
    let err = gateway.judge_similarity(AttributeKey::Site, &v("Riverside"), &v("Hilltop")).unwrap_err();
    assert!(matches!(err, ProviderError::Auth(_)), "{err:?}");
    assert_eq!(server.requests().len(), 1);

    server
        .reply(503, json!({"error": {"message": "overloaded"}}))
        .reply(429, json!({"error": {"message": "slow down"}}))
        .chat(json!({"similar": true}));
    assert!(gateway.judge_similarity(AttributeKey::Site, &v("Riverside"), &v("By the river")).unwrap());
    assert_eq!(server.requests().len(), 4);
}

#[test]
fn alternatives_are_batched_and_tabu_answers_retried() {
    let server = Server::start();
    server
        .chat(json!({"alternatives": {"site": "Coastal cliffside", "lighting": "Moonlight"}}))
        .chat(json!({"alternatives": {"site": "Mountainous highland", "lighting": "Moonlight"}}));
    let (gateway, _) = server.gateway();
    let context = AttributeMap::from_fn(|k| v(&format!("{} value", k.label())));
    let requests = [
        (AttributeKey::Site, vec![v("Rural setting"), v("Coastal cliffside")]),
        (AttributeKey::Lighting, vec![]),
    ]
    .into_iter()
    .collect();
    let out = gateway
        .novel_alternatives(&validate_initial_prompt("malaysian longhouse").unwrap(), &context, &requests)
        .unwrap();
    assert_eq!(out[&AttributeKey::Site].as_str(), "Mountainous highland");
    assert_eq!(out[&AttributeKey::Lighting].as_str(), "Moonlight");
    let sent = server.requests();
    assert_eq!(sent.len(), 2);
    let user = sent[0].body["messages"][1]["content"].as_str().unwrap();
    assert!(user.contains("Coastal cliffside"));
    assert!(user.contains("lighting"));
}

#[test]
fn images_are_decoded_stored_and_scored() {
    let server = Server::start();
    let png_a = b"\x89PNG fake a".to_vec();
    let png_b = b"\x89PNG fake b".to_vec();
    let b64 = |bytes: &[u8]| base64::engine::general_purpose::STANDARD.encode(bytes);
    server
        .reply(200, json!({"data": [{"b64_json": b64(&png_a), "revised_prompt": "A longhouse on stilts"}]}))
        .reply(200, json!({"data": [{"b64_json": b64(&png_b), "revised_prompt": "A longhouse at dusk"}]}))
        .chat(json!("The images differ a lot. {\"score\": 7.5}"));
    let (gateway, store) = server.gateway();
    let prompt = validate_initial_prompt("malaysian longhouse").unwrap();
    let attrs = AttributeMap::from_fn(|k| v(&format!("{} value", k.label())));
    let a = gateway.generate_image(&prompt, &attrs).unwrap();
    let b = gateway.generate_baseline_image(&prompt, 1).unwrap();
    assert_eq!(a.description, "A longhouse on stilts");
    assert_eq!(store.len(), 2);
    let digest = a.image.digest.clone().unwrap();
    assert_eq!(a.image.uri, format!("images/{digest}.png"));

    let score = gateway.score_image_difference(&a.image, &b.image).unwrap();
    assert_eq!(score, 7.5);
    assert_eq!(gateway.score_image_difference(&a.image, &a.image).unwrap(), 0.0);

    let sent = server.requests();
    assert_eq!(sent[0].path, "/v1/images/generations");
    assert_eq!(sent[0].body["model"], "dall-e-3");
    assert_eq!(sent[0].body["response_format"], "b64_json");
    let vision = &sent[2].body;
    assert_eq!(vision["model"], "gpt-4-vision-preview");
    let url = vision["messages"][0]["content"][1]["image_url"]["url"].as_str().unwrap();
    assert_eq!(url, format!("data:image/png;base64,{}", b64(&png_a)));
}

#[test]
fn out_of_range_scores_are_rejected() {
    let server = Server::start();
    server.chat(json!({"score": 11})).chat(json!({"score": -1})).chat(json!({"score": "high"}));
    let (gateway, _) = server.gateway();
    let a = ImageRef { uri: "https://example.invalid/a.png".into(), digest: None };
    let b = ImageRef { uri: "https://example.invalid/b.png".into(), digest: None };
    assert!(matches!(gateway.score_image_difference(&a, &b), Err(ProviderError::MalformedAttributes(_))));
}

#[test]
fn secrets_stay_out_of_debug_output() {
    let config = ProviderConfig { api_key: Some("sk-very-secret".into()), ..ProviderConfig::default() };
    assert!(!format!("{config:?}").contains("sk-very-secret"));
}
