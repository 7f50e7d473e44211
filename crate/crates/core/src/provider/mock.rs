//! Deterministic offline backend.
//!
//! Every answer is a pure function of the seed, the fixture tables and the
//! request: draws come from hashing those together, so reruns, concurrent
//! callers and restarts all see the same values.
//!
//! Fixture document schema (JSON):
//!
//! ```text
//! {
//!   "vocabulary": { "<attribute>": ["value", ...] },        // >= 64 distinct values per attribute
//!   "initial": [ { "prompt": "...", "individuals": [<attribute object> x 4] } ],
//!   "blends": [ { "key": "<attribute>"?, "a": "...", "b": "...", "value": "..." } ],
//!   "similarity": [ { "key": "<attribute>"?, "a": "...", "b": "...", "similar": bool } ],
//!   "difference_scores": [ { "a": "<digest>", "b": "<digest>", "score": 0..10 } ]
//! }
//! ```
//!
//! Blend, similarity and score entries are symmetric in `a`/`b`; text matches
//! are case-insensitive and trimmed. A missing `key` matches every attribute.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{GeneratedImage, ImageBackend, ImageRequest, ProviderError, TextBackend, TextTask, VisionBackend};
use crate::genome::{normalize, AttributeKey, AttributeMap, AttributeValue, ImageRef, MAX_ATTRIBUTE_CHARS, POPULATION_SIZE};

/// Smallest vocabulary pool accepted per attribute.
pub const MIN_POOL_SIZE: usize = 64;

const BUILTIN: &str = include_str!("../../fixtures/mock_default.json");
const MOCK_IMAGE_SIDE: u32 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialFixture {
    pub prompt: String,
    pub individuals: Vec<AttributeMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendFixture {
    #[serde(default)]
    pub key: Option<AttributeKey>,
    pub a: String,
    pub b: String,
    pub value: AttributeValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityFixture {
    #[serde(default)]
    pub key: Option<AttributeKey>,
    pub a: String,
    pub b: String,
    pub similar: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFixture {
    pub a: String,
    pub b: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockFixtures {
    pub vocabulary: BTreeMap<AttributeKey, Vec<AttributeValue>>,
    #[serde(default)]
    pub initial: Vec<InitialFixture>,
    #[serde(default)]
    pub blends: Vec<BlendFixture>,
    #[serde(default)]
    pub similarity: Vec<SimilarityFixture>,
    #[serde(default)]
    pub difference_scores: Vec<ScoreFixture>,
}

impl MockFixtures {
    /// The fixture document compiled into the crate.
    pub fn builtin() -> Self {
        MockFixtures::from_json(BUILTIN).expect("built-in mock fixtures are valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ProviderError> {
        let fixtures: MockFixtures =
            serde_json::from_str(text).map_err(|e| ProviderError::Config(format!("mock fixtures: {e}")))?;
        fixtures.validate()?;
        Ok(fixtures)
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("reading {}: {e}", path.display())))?;
        MockFixtures::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |msg: String| Err(ProviderError::Config(format!("mock fixtures: {msg}")));
        for key in AttributeKey::ALL {
            let pool = self.vocabulary.get(&key).map(Vec::as_slice).unwrap_or(&[]);
            let distinct: HashSet<_> = pool.iter().map(|v| normalize(v.as_str())).collect();
            if distinct.len() < MIN_POOL_SIZE {
                return bad(format!("vocabulary for {key} has {} distinct values, need {MIN_POOL_SIZE}", distinct.len()));
            }
        }
        for entry in &self.initial {
            if entry.individuals.len() != POPULATION_SIZE {
                return bad(format!("initial entry {:?} has {} individuals", entry.prompt, entry.individuals.len()));
            }
        }
        for entry in &self.difference_scores {
            if !(0.0..=10.0).contains(&entry.score) {
                return bad(format!("score {} outside [0, 10]", entry.score));
            }
        }
        Ok(())
    }

    pub fn pool(&self, key: AttributeKey) -> &[AttributeValue] {
        self.vocabulary.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn with_similarity(mut self, key: Option<AttributeKey>, a: &str, b: &str, similar: bool) -> Self {
        self.similarity.push(SimilarityFixture { key, a: a.into(), b: b.into(), similar });
        self
    }

    pub fn with_blend(mut self, key: Option<AttributeKey>, a: &str, b: &str, value: &str) -> Self {
        let value = AttributeValue::new(value).expect("fixture blend value is valid");
        self.blends.push(BlendFixture { key, a: a.into(), b: b.into(), value });
        self
    }

    pub fn with_score(mut self, a: &str, b: &str, score: f64) -> Self {
        self.difference_scores.push(ScoreFixture { a: a.into(), b: b.into(), score });
        self
    }
}

fn symmetric_match(a: &str, b: &str, x: &str, y: &str) -> bool {
    let (a, b, x, y) = (normalize(a), normalize(b), normalize(x), normalize(y));
    (a == x && b == y) || (a == y && b == x)
}

fn key_matches(fixture: Option<AttributeKey>, key: AttributeKey) -> bool {
    fixture.is_none_or(|k| k == key)
}

/// SHA-256 over the seed and length-prefixed parts.
fn hash_parts(seed: u64, parts: &[&str]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let mut out = [0u8; 32];
    out.copy_from_slice(hasher.finalize().as_slice());
    out
}

fn draw(seed: u64, parts: &[&str]) -> u64 {
    let h = hash_parts(seed, parts);
    u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
}

fn truncate_chars(text: &str, max: usize) -> &str {
    match text.char_indices().nth(max) {
        Some((idx, _)) => text[..idx].trim_end(),
        None => text,
    }
}

fn solid_png(rgb: [u8; 3]) -> Vec<u8> {
    let side = MOCK_IMAGE_SIDE;
    let pixels: Vec<u8> = rgb.iter().copied().cycle().take((side * side * 3) as usize).collect();
    let mut buf = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut buf, side, side);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().expect("in-memory png header");
        writer.write_image_data(&pixels).expect("in-memory png data");
    }
    buf
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
    fixtures: MockFixtures,
}

impl MockBackend {
    pub fn new(seed: u64, fixtures: MockFixtures) -> Self {
        MockBackend { seed, fixtures }
    }

    pub fn fixtures(&self) -> &MockFixtures {
        &self.fixtures
    }

    /// `count` distinct pool values for `key`, ordered by a seeded hash.
    fn distinct_draws(&self, key: AttributeKey, salt: &str, count: usize) -> Vec<AttributeValue> {
        let mut pool: Vec<_> = self.fixtures.pool(key).to_vec();
        pool.sort_by_key(|v| draw(self.seed, &["initial", salt, key.as_str(), v.as_str()]));
        pool.truncate(count);
        pool
    }

    fn initial(&self, prompt: &str) -> Value {
        if let Some(entry) = self.fixtures.initial.iter().find(|e| normalize(&e.prompt) == normalize(prompt)) {
            return json!({ "individuals": entry.individuals });
        }
        let columns: BTreeMap<_, _> = AttributeKey::ALL
            .into_iter()
            .map(|k| (k, self.distinct_draws(k, prompt, POPULATION_SIZE)))
            .collect();
        let individuals: Vec<AttributeMap> = (0..POPULATION_SIZE)
            .map(|i| AttributeMap::from_fn(|k| columns[&k][i % columns[&k].len()].clone()))
            .collect();
        json!({ "individuals": individuals })
    }

    fn blend(&self, key: AttributeKey, a: &str, b: &str) -> Value {
        if normalize(a) == normalize(b) {
            return json!({ "value": a });
        }
        if let Some(entry) = self
            .fixtures
            .blends
            .iter()
            .find(|e| key_matches(e.key, key) && symmetric_match(&e.a, &e.b, a, b))
        {
            return json!({ "value": entry.value });
        }
        let fused = format!("{a} + {b} fusion");
        if fused.chars().count() <= MAX_ATTRIBUTE_CHARS {
            return json!({ "value": fused });
        }
        // keep repeated blends of blends inside the attribute length cap
        let budget = (MAX_ATTRIBUTE_CHARS - " + ".len() - " fusion".len()) / 2;
        json!({ "value": format!("{} + {} fusion", truncate_chars(a, budget), truncate_chars(b, budget)) })
    }

    fn similar(&self, key: AttributeKey, a: &str, b: &str) -> Value {
        let similar = normalize(a) == normalize(b)
            || self
                .fixtures
                .similarity
                .iter()
                .find(|e| key_matches(e.key, key) && symmetric_match(&e.a, &e.b, a, b))
                .is_some_and(|e| e.similar);
        json!({ "similar": similar })
    }

    /// Picks a pool value outside the tabu list, preferring one that differs
    /// from the current value. Falls back to numbered variations once the
    /// pool is exhausted.
    fn alternative(&self, key: AttributeKey, context: &AttributeMap, tabu: &[AttributeValue]) -> String {
        let banned: HashSet<String> = tabu.iter().map(|v| normalize(v.as_str())).collect();
        let current = normalize(context.get(key).as_str());
        let context_json = serde_json::to_string(context).expect("attribute map serializes");
        let pick = draw(self.seed, &["novel", key.as_str(), &context_json, &tabu.len().to_string()]);

        let pool = self.fixtures.pool(key);
        let open: Vec<&AttributeValue> = pool.iter().filter(|v| !banned.contains(&normalize(v.as_str()))).collect();
        let fresh: Vec<&AttributeValue> = open.iter().copied().filter(|v| normalize(v.as_str()) != current).collect();
        if !fresh.is_empty() {
            return fresh[(pick % fresh.len() as u64) as usize].to_string();
        }
        if let Some(only) = open.first() {
            return only.to_string();
        }
        let base = &pool[(pick % pool.len() as u64) as usize];
        (1u64..)
            .map(|n| format!("{base} variation {n}"))
            .find(|candidate| !banned.contains(&normalize(candidate)))
            .expect("unbounded search finds a free variation")
    }

    fn alternatives(&self, context: &AttributeMap, requests: &BTreeMap<AttributeKey, Vec<AttributeValue>>) -> Value {
        let out: serde_json::Map<String, Value> = requests
            .iter()
            .map(|(key, tabu)| (key.as_str().to_string(), Value::String(self.alternative(*key, context, tabu))))
            .collect();
        json!({ "alternatives": out })
    }

    fn score(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 0.0;
        }
        if let Some(entry) = self.fixtures.difference_scores.iter().find(|e| {
            (e.a == a && e.b == b) || (e.a == b && e.b == a)
        }) {
            return entry.score;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        (draw(self.seed, &["difference", lo, hi]) % 10_001) as f64 / 1000.0
    }
}

impl TextBackend for MockBackend {
    fn complete(&self, task: &TextTask<'_>) -> Result<Value, ProviderError> {
        Ok(match *task {
            TextTask::InitialAttributes { prompt } => self.initial(prompt.as_str()),
            TextTask::Blend { key, first, second } => self.blend(key, first.as_str(), second.as_str()),
            TextTask::Similarity { key, candidate, reference } => self.similar(key, candidate.as_str(), reference.as_str()),
            TextTask::NovelAlternatives { context, requests, .. } => self.alternatives(context, requests),
        })
    }
}

impl ImageBackend for MockBackend {
    fn render(&self, request: &ImageRequest<'_>) -> Result<GeneratedImage, ProviderError> {
        let detail = match request.attributes {
            Some(attrs) => serde_json::to_string(attrs).expect("attribute map serializes"),
            None => format!("baseline:{}", request.variant),
        };
        let hash = hash_parts(0, &["image", request.prompt.as_str(), &detail]);
        let digest = hex::encode(hash);
        let description = match request.attributes {
            Some(attrs) => format!(
                "Mock rendering of \"{}\": a {} building in {} style at {}, built from {}, in {} with {}.",
                request.prompt,
                attrs.get(AttributeKey::ShapeForm),
                attrs.get(AttributeKey::ArchitecturalStyle),
                attrs.get(AttributeKey::Site),
                attrs.get(AttributeKey::Materials),
                attrs.get(AttributeKey::Colors),
                attrs.get(AttributeKey::Lighting),
            ),
            None => format!("Mock rendering of \"{}\" (variant {}).", request.prompt, request.variant),
        };
        Ok(GeneratedImage {
            image: ImageRef { uri: format!("images/{digest}.png"), digest: Some(digest) },
            description,
            bytes: Some(solid_png([hash[0], hash[1], hash[2]])),
        })
    }
}

impl VisionBackend for MockBackend {
    fn difference(&self, a: &ImageRef, b: &ImageRef) -> Result<Value, ProviderError> {
        Ok(json!({ "score": self.score(a.identity(), b.identity()) }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::validate_initial_prompt;
    use crate::provider::schema;

    fn backend(seed: u64) -> MockBackend {
        MockBackend::new(seed, MockFixtures::builtin())
    }

    fn value(s: &str) -> AttributeValue {
        AttributeValue::new(s).unwrap()
    }

    #[test]
    fn builtin_pools_are_large_enough() {
        let fixtures = MockFixtures::builtin();
        for key in AttributeKey::ALL {
            assert!(fixtures.pool(key).len() >= MIN_POOL_SIZE);
        }
    }

    #[test]
    fn small_pools_are_rejected() {
        let mut fixtures = MockFixtures::builtin();
        fixtures.vocabulary.get_mut(&AttributeKey::Site).unwrap().truncate(10);
        assert!(fixtures.validate().is_err());
    }

    #[test]
    fn initial_attributes_are_rerun_identical_and_distinct() {
        let prompt = validate_initial_prompt("x-house").unwrap();
        let task = TextTask::InitialAttributes { prompt: &prompt };
        let first = backend(42).complete(&task).unwrap();
        assert_eq!(first, backend(42).complete(&task).unwrap());
        assert_ne!(first, backend(43).complete(&task).unwrap());
        let maps = schema::initial_attributes(&first).unwrap();
        for key in AttributeKey::ALL {
            let distinct: HashSet<_> = maps.iter().map(|m| m.get(key).clone()).collect();
            assert_eq!(distinct.len(), 4);
        }
    }

    #[test]
    fn fixture_prompt_reproduces_table() {
        let prompt = validate_initial_prompt("Malaysian Longhouse").unwrap();
        let maps = schema::initial_attributes(&backend(1).complete(&TextTask::InitialAttributes { prompt: &prompt }).unwrap()).unwrap();
        assert_eq!(maps[0].get(AttributeKey::ArchitecturalStyle).as_str(), "Traditional Malay");
        assert_eq!(maps[0].get(AttributeKey::Site).as_str(), "Rural village");
        assert_eq!(maps[0].get(AttributeKey::Materials).as_str(), "Wood, bamboo, thatch");
    }

    #[test]
    fn blend_rules() {
        let b = backend(0);
        assert_eq!(b.blend(AttributeKey::Materials, "Bamboo", "Bamboo"), json!({"value": "Bamboo"}));
        assert_eq!(b.blend(AttributeKey::Site, "A", "B"), json!({"value": "A + B fusion"}));
        assert_eq!(
            b.blend(AttributeKey::Colors, "Chrome and electric blue", "Earthy tones with accents of electric lime"),
            json!({"value": "Earth tones with chrome accents and electric blue highlights"})
        );
        let long = "x".repeat(150);
        let out = b.blend(AttributeKey::Site, &long, "y");
        assert!(schema::blend(&out).is_ok());
    }

    #[test]
    fn similarity_table() {
        let b = backend(0);
        assert_eq!(b.similar(AttributeKey::Site, "Riverside", "Near agricultural lands"), json!({"similar": false}));
        assert_eq!(
            b.similar(AttributeKey::Lighting, "Natural daylight, oil lamps", "Sunlight, torches"),
            json!({"similar": true})
        );
        // keyed entries do not leak into other attributes
        assert_eq!(b.similar(AttributeKey::Colors, "Sunlight, torches", "Natural daylight, oil lamps"), json!({"similar": false}));
    }

    #[test]
    fn exhausted_pool_returns_the_last_free_value() {
        let b = backend(9);
        let pool = b.fixtures().pool(AttributeKey::Site).to_vec();
        let (last, taken) = pool.split_last().unwrap();
        let context = AttributeMap::from_fn(|_| taken[0].clone());
        assert_eq!(b.alternative(AttributeKey::Site, &context, taken), last.to_string());
    }

    #[test]
    fn fully_exhausted_pool_synthesizes_fresh_values() {
        let b = backend(9);
        let mut tabu = b.fixtures().pool(AttributeKey::Site).to_vec();
        let context = AttributeMap::from_fn(|_| tabu[0].clone());
        for _ in 0..5 {
            let alt = b.alternative(AttributeKey::Site, &context, &tabu);
            assert!(!tabu.iter().any(|t| t.matches(&alt)));
            tabu.push(value(&alt));
        }
    }

    #[test]
    fn images_are_keyed_by_inputs() {
        let b = backend(0);
        let prompt = validate_initial_prompt("x-house").unwrap();
        let attrs = AttributeMap::from_fn(|k| value(k.label()));
        let req = ImageRequest { prompt: &prompt, attributes: Some(&attrs), variant: 0 };
        let one = b.render(&req).unwrap();
        assert_eq!(one, b.render(&req).unwrap());
        assert_eq!(one.image, backend(77).render(&req).unwrap().image);
        let bytes = one.bytes.unwrap();
        assert_eq!(&bytes[1..4], b"PNG");
        let baseline_a = b.render(&ImageRequest { prompt: &prompt, attributes: None, variant: 0 }).unwrap();
        let baseline_b = b.render(&ImageRequest { prompt: &prompt, attributes: None, variant: 1 }).unwrap();
        assert_ne!(baseline_a.image, baseline_b.image);
    }

    #[test]
    fn scores_are_symmetric_and_fixture_driven() {
        let b = MockBackend::new(3, MockFixtures::builtin().with_score("aa", "bb", 8.0));
        assert_eq!(b.score("aa", "bb"), 8.0);
        assert_eq!(b.score("bb", "aa"), 8.0);
        assert_eq!(b.score("aa", "aa"), 0.0);
        let s = b.score("cc", "dd");
        assert!((0.0..=10.0).contains(&s));
        assert_eq!(s, b.score("dd", "cc"));
    }
}
