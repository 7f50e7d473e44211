//! Genome, rating and session data model.
//!
//! Everything here is plain data plus validation. The canonical JSON form of
//! these types (snake_case keys) is shared by storage, the HTTP API and the
//! test fixtures.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum length of an attribute value, in characters.
pub const MAX_ATTRIBUTE_CHARS: usize = 200;

/// Minimum length of an initial prompt after trimming.
pub const MIN_PROMPT_CHARS: usize = 4;

/// Number of individuals in every generation.
pub const POPULATION_SIZE: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenomeError {
    #[error("prompt must be at least {MIN_PROMPT_CHARS} characters after trimming (got {0})")]
    PromptTooShort(usize),
    #[error("attribute value must not be empty")]
    EmptyAttribute,
    #[error("attribute value exceeds {MAX_ATTRIBUTE_CHARS} characters (got {0})")]
    AttributeTooLong(usize),
    #[error("attribute map is missing key {0}")]
    MissingAttribute(AttributeKey),
    #[error("generation {index} has {len} members, expected {POPULATION_SIZE}")]
    GenerationSize { index: u32, len: usize },
    #[error("invalid session: {0}")]
    InvalidSession(String),
}

/// One of the six evolved design dimensions.
///
/// Declaration order is the internal order; `Ord` and every `BTreeMap` keyed by
/// `AttributeKey` iterate in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKey {
    ArchitecturalStyle,
    Site,
    Colors,
    Lighting,
    ShapeForm,
    Materials,
}

impl AttributeKey {
    pub const ALL: [AttributeKey; 6] = [
        AttributeKey::ArchitecturalStyle,
        AttributeKey::Site,
        AttributeKey::Colors,
        AttributeKey::Lighting,
        AttributeKey::ShapeForm,
        AttributeKey::Materials,
    ];

    /// Order used when showing an attribute table to a person.
    pub const DISPLAY_ORDER: [AttributeKey; 6] = [
        AttributeKey::ArchitecturalStyle,
        AttributeKey::Colors,
        AttributeKey::Lighting,
        AttributeKey::Materials,
        AttributeKey::ShapeForm,
        AttributeKey::Site,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeKey::ArchitecturalStyle => "architectural_style",
            AttributeKey::Site => "site",
            AttributeKey::Colors => "colors",
            AttributeKey::Lighting => "lighting",
            AttributeKey::ShapeForm => "shape_form",
            AttributeKey::Materials => "materials",
        }
    }

    /// Human-readable label, as used in provider prompts.
    pub fn label(self) -> &'static str {
        match self {
            AttributeKey::ArchitecturalStyle => "architectural style",
            AttributeKey::Site => "site",
            AttributeKey::Colors => "colors",
            AttributeKey::Lighting => "lighting",
            AttributeKey::ShapeForm => "shape/form",
            AttributeKey::Materials => "materials",
        }
    }

    pub fn parse(s: &str) -> Option<AttributeKey> {
        AttributeKey::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for AttributeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lowercased, trimmed form used for every equality test between values.
pub fn normalize(text: &str) -> String {
    text.trim().to_lowercase()
}

/// A single gene value: trimmed, non-empty, at most 200 characters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AttributeValue(String);

impl AttributeValue {
    pub fn new(text: impl AsRef<str>) -> Result<Self, GenomeError> {
        let trimmed = text.as_ref().trim();
        if trimmed.is_empty() {
            return Err(GenomeError::EmptyAttribute);
        }
        let len = trimmed.chars().count();
        if len > MAX_ATTRIBUTE_CHARS {
            return Err(GenomeError::AttributeTooLong(len));
        }
        Ok(AttributeValue(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Case-insensitive, whitespace-trimmed equality.
    pub fn matches(&self, other: &str) -> bool {
        normalize(&self.0) == normalize(other)
    }
}

impl TryFrom<String> for AttributeValue {
    type Error = GenomeError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        AttributeValue::new(value)
    }
}

impl From<AttributeValue> for String {
    fn from(value: AttributeValue) -> Self {
        value.0
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The user's seed concept. Fixed for the lifetime of a session.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct InitialPrompt(String);

impl InitialPrompt {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for InitialPrompt {
    type Error = GenomeError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        validate_initial_prompt(&value)
    }
}

impl From<InitialPrompt> for String {
    fn from(value: InitialPrompt) -> Self {
        value.0
    }
}

impl fmt::Display for InitialPrompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Trims `text` and accepts it when at least four characters remain.
pub fn validate_initial_prompt(text: &str) -> Result<InitialPrompt, GenomeError> {
    let trimmed = text.trim();
    let len = trimmed.chars().count();
    if len < MIN_PROMPT_CHARS {
        return Err(GenomeError::PromptTooShort(len));
    }
    Ok(InitialPrompt(trimmed.to_string()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rating {
    #[serde(alias = "good")]
    Good,
    #[serde(alias = "bad")]
    Bad,
    #[default]
    #[serde(alias = "unrated")]
    Unrated,
}

/// Total map from every [`AttributeKey`] to a value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<AttributeKey, AttributeValue>")]
pub struct AttributeMap(BTreeMap<AttributeKey, AttributeValue>);

impl AttributeMap {
    pub fn from_fn<F>(mut f: F) -> Self
    where
        F: FnMut(AttributeKey) -> AttributeValue,
    {
        AttributeMap(AttributeKey::ALL.into_iter().map(|k| (k, f(k))).collect())
    }

    pub fn try_from_fn<F, E>(mut f: F) -> Result<Self, E>
    where
        F: FnMut(AttributeKey) -> Result<AttributeValue, E>,
    {
        let mut map = BTreeMap::new();
        for key in AttributeKey::ALL {
            map.insert(key, f(key)?);
        }
        Ok(AttributeMap(map))
    }

    pub fn get(&self, key: AttributeKey) -> &AttributeValue {
        // totality is enforced by every constructor
        &self.0[&key]
    }

    pub fn set(&mut self, key: AttributeKey, value: AttributeValue) {
        self.0.insert(key, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (AttributeKey, &AttributeValue)> {
        self.0.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<BTreeMap<AttributeKey, AttributeValue>> for AttributeMap {
    type Error = GenomeError;
    fn try_from(map: BTreeMap<AttributeKey, AttributeValue>) -> Result<Self, Self::Error> {
        for key in AttributeKey::ALL {
            if !map.contains_key(&key) {
                return Err(GenomeError::MissingAttribute(key));
            }
        }
        Ok(AttributeMap(map))
    }
}

/// Total map from every [`AttributeKey`] to a [`Rating`].
///
/// Deserializes from a partial JSON object; absent keys are `Unrated`.
/// Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "BTreeMap<AttributeKey, Rating>")]
pub struct RatingMap(BTreeMap<AttributeKey, Rating>);

impl Default for RatingMap {
    fn default() -> Self {
        RatingMap(AttributeKey::ALL.into_iter().map(|k| (k, Rating::Unrated)).collect())
    }
}

impl From<BTreeMap<AttributeKey, Rating>> for RatingMap {
    fn from(partial: BTreeMap<AttributeKey, Rating>) -> Self {
        let mut map = RatingMap::default();
        for (k, r) in partial {
            map.0.insert(k, r);
        }
        map
    }
}

impl RatingMap {
    pub fn get(&self, key: AttributeKey) -> Rating {
        self.0.get(&key).copied().unwrap_or_default()
    }

    pub fn set(&mut self, key: AttributeKey, rating: Rating) {
        self.0.insert(key, rating);
    }

    pub fn with(mut self, key: AttributeKey, rating: Rating) -> Self {
        self.set(key, rating);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (AttributeKey, Rating)> + '_ {
        self.0.iter().map(|(k, r)| (*k, *r))
    }

    pub fn count(&self, rating: Rating) -> usize {
        self.0.values().filter(|r| **r == rating).count()
    }

    pub fn is_all_unrated(&self) -> bool {
        self.count(Rating::Unrated) == AttributeKey::ALL.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndividualId(String);

impl IndividualId {
    /// Ids are positional within a session, so scripted runs can refer to them.
    pub fn positional(generation: u32, slot: usize) -> Self {
        IndividualId(format!("g{generation}i{slot}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for IndividualId {
    fn from(s: &str) -> Self {
        IndividualId(s.to_string())
    }
}

impl From<String> for IndividualId {
    fn from(s: String) -> Self {
        IndividualId(s)
    }
}

impl fmt::Display for IndividualId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

impl SessionId {
    pub fn new(id: impl Into<String>) -> Self {
        SessionId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Opaque reference to a rendered image.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRef {
    pub uri: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
}

impl ImageRef {
    /// Identity used for pairwise comparisons: digest when known, else the URI.
    pub fn identity(&self) -> &str {
        self.digest.as_deref().unwrap_or(&self.uri)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Individual {
    pub id: IndividualId,
    pub initial_prompt: InitialPrompt,
    pub attributes: AttributeMap,
    pub image: ImageRef,
    pub description: String,
    pub generation_index: u32,
    pub parent_ids: Vec<IndividualId>,
    #[serde(default)]
    pub ratings: RatingMap,
}

/// A parent as chosen for one step, with the ratings given at that step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatedParent {
    pub id: IndividualId,
    pub ratings: RatingMap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub index: u32,
    pub members: Vec<Individual>,
    /// The parent choice that produced this generation; `None` for generation 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Vec<RatedParent>>,
}

/// Per-key memory of every value the user has rated Bad. Append-only.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "BTreeMap<AttributeKey, Vec<AttributeValue>>", into = "BTreeMap<AttributeKey, Vec<AttributeValue>>")]
pub struct TabuList {
    entries: BTreeMap<AttributeKey, Vec<AttributeValue>>,
    index: HashSet<(AttributeKey, String)>,
}

impl PartialEq for TabuList {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Eq for TabuList {}

impl From<BTreeMap<AttributeKey, Vec<AttributeValue>>> for TabuList {
    fn from(raw: BTreeMap<AttributeKey, Vec<AttributeValue>>) -> Self {
        let mut tabu = TabuList::default();
        for (key, values) in raw {
            for v in values {
                tabu.insert(key, v);
            }
        }
        tabu
    }
}

impl From<TabuList> for BTreeMap<AttributeKey, Vec<AttributeValue>> {
    fn from(tabu: TabuList) -> Self {
        tabu.entries
    }
}

impl TabuList {
    /// Adds `value` to the list for `key`. Returns false when an equal
    /// (case-insensitive, trimmed) value is already present.
    pub fn insert(&mut self, key: AttributeKey, value: AttributeValue) -> bool {
        if !self.index.insert((key, normalize(value.as_str()))) {
            return false;
        }
        self.entries.entry(key).or_default().push(value);
        true
    }

    pub fn contains(&self, key: AttributeKey, value: &str) -> bool {
        self.index.contains(&(key, normalize(value)))
    }

    pub fn values(&self, key: AttributeKey) -> &[AttributeValue] {
        self.entries.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self, key: AttributeKey) -> usize {
        self.values(key).len()
    }

    pub fn total(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    AwaitingSelection,
    Generating,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: SessionId,
    pub prompt: InitialPrompt,
    pub generations: Vec<Generation>,
    pub tabu: TabuList,
    pub status: SessionStatus,
    #[serde(default)]
    pub favourite: Option<IndividualId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_ratings: Option<RatingMap>,
    pub rng_seed: u64,
}

impl Session {
    pub fn new(id: SessionId, prompt: InitialPrompt, rng_seed: u64) -> Self {
        Session {
            id,
            prompt,
            generations: Vec::new(),
            tabu: TabuList::default(),
            status: SessionStatus::Generating,
            favourite: None,
            final_ratings: None,
            rng_seed,
        }
    }

    pub fn individuals(&self) -> impl Iterator<Item = &Individual> {
        self.generations.iter().flat_map(|g| g.members.iter())
    }

    pub fn find(&self, id: &IndividualId) -> Option<&Individual> {
        self.individuals().find(|i| &i.id == id)
    }

    pub fn find_mut(&mut self, id: &IndividualId) -> Option<&mut Individual> {
        self.generations
            .iter_mut()
            .flat_map(|g| g.members.iter_mut())
            .find(|i| &i.id == id)
    }

    pub fn latest(&self) -> Option<&Generation> {
        self.generations.last()
    }

    /// Index the next generation will receive.
    pub fn next_index(&self) -> u32 {
        self.generations.len() as u32
    }

    /// Checks the structural invariants. Used after loading stored records.
    pub fn validate(&self) -> Result<(), GenomeError> {
        let invalid = |msg: String| Err(GenomeError::InvalidSession(msg));
        let mut seen = HashSet::new();
        for (pos, generation) in self.generations.iter().enumerate() {
            if generation.index as usize != pos {
                return invalid(format!("generation at position {pos} has index {}", generation.index));
            }
            if generation.members.len() != POPULATION_SIZE {
                return Err(GenomeError::GenerationSize {
                    index: generation.index,
                    len: generation.members.len(),
                });
            }
            for member in &generation.members {
                if member.generation_index != generation.index {
                    return invalid(format!("{} carries generation_index {}", member.id, member.generation_index));
                }
                let expected_parents = if generation.index == 0 { 0 } else { 2 };
                if member.parent_ids.len() != expected_parents {
                    return invalid(format!("{} has {} parents", member.id, member.parent_ids.len()));
                }
                if !seen.insert(member.id.clone()) {
                    return invalid(format!("duplicate individual id {}", member.id));
                }
            }
        }
        if self.status == SessionStatus::Finished && self.favourite.is_none() {
            return invalid("finished session without a favourite".into());
        }
        if let Some(fav) = &self.favourite {
            if self.find(fav).is_none() {
                return invalid(format!("favourite {fav} is not in the session"));
            }
        }
        Ok(())
    }
}

/// Merges `ratings` into a selected parent and appends every Bad-rated value
/// to the tabu list.
///
/// Only Good and Bad ratings overwrite what the parent already carries; an
/// Unrated entry leaves an earlier judgement in place.
pub fn record_parent_ratings(individual: &mut Individual, ratings: &RatingMap, tabu: &mut TabuList) {
    for (key, rating) in ratings.iter() {
        if rating == Rating::Unrated {
            continue;
        }
        individual.ratings.set(key, rating);
        if rating == Rating::Bad {
            tabu.insert(key, individual.attributes.get(key).clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(s: &str) -> AttributeValue {
        AttributeValue::new(s).unwrap()
    }

    fn table_one_individual() -> Individual {
        let attrs = [
            (AttributeKey::ArchitecturalStyle, "Traditional Malay"),
            (AttributeKey::Colors, "Natural wood, Red, Yellow"),
            (AttributeKey::Lighting, "Natural daylight, oil lamps"),
            (AttributeKey::Materials, "Wood, bamboo, thatch"),
            (AttributeKey::ShapeForm, "Rectangular, stilted"),
            (AttributeKey::Site, "Rural village"),
        ];
        let map: BTreeMap<_, _> = attrs.iter().map(|(k, v)| (*k, value(v))).collect();
        Individual {
            id: IndividualId::positional(0, 0),
            initial_prompt: validate_initial_prompt("malaysian longhouse").unwrap(),
            attributes: AttributeMap::try_from(map).unwrap(),
            image: ImageRef { uri: "images/x.png".into(), digest: None },
            description: String::new(),
            generation_index: 0,
            parent_ids: vec![],
            ratings: RatingMap::default(),
        }
    }

    #[test]
    fn prompt_length_boundary() {
        assert_eq!(validate_initial_prompt("malaysian longhouse").unwrap().as_str(), "malaysian longhouse");
        assert_eq!(validate_initial_prompt("abc"), Err(GenomeError::PromptTooShort(3)));
        assert_eq!(validate_initial_prompt("  hut "), Err(GenomeError::PromptTooShort(3)));
        assert_eq!(validate_initial_prompt(" abcd ").unwrap().as_str(), "abcd");
    }

    #[test]
    fn attribute_value_limits() {
        assert_eq!(AttributeValue::new("   "), Err(GenomeError::EmptyAttribute));
        assert!(AttributeValue::new("x".repeat(200)).is_ok());
        assert_eq!(AttributeValue::new("x".repeat(201)), Err(GenomeError::AttributeTooLong(201)));
        assert_eq!(value("  Riverside ").as_str(), "Riverside");
        assert!(value("Rural village").matches("rural village "));
    }

    #[test]
    fn key_orders() {
        let names: Vec<_> = AttributeKey::ALL.iter().map(|k| k.as_str()).collect();
        assert_eq!(names, ["architectural_style", "site", "colors", "lighting", "shape_form", "materials"]);
        let display: Vec<_> = AttributeKey::DISPLAY_ORDER.iter().map(|k| k.as_str()).collect();
        assert_eq!(display, ["architectural_style", "colors", "lighting", "materials", "shape_form", "site"]);
        for k in AttributeKey::ALL {
            assert_eq!(AttributeKey::parse(k.as_str()), Some(k));
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.as_str()));
        }
    }

    #[test]
    fn rating_map_deserializes_partial_and_rejects_unknown_keys() {
        let map: RatingMap = serde_json::from_str(r#"{"site":"Bad"}"#).unwrap();
        assert_eq!(map.get(AttributeKey::Site), Rating::Bad);
        assert_eq!(map.count(Rating::Unrated), 5);
        assert!(serde_json::from_str::<RatingMap>(r#"{"roof":"Bad"}"#).is_err());
    }

    #[test]
    fn attribute_map_requires_all_keys() {
        let json = r#"{"architectural_style":"a","site":"b","colors":"c","lighting":"d","shape_form":"e"}"#;
        assert!(serde_json::from_str::<AttributeMap>(json).is_err());
    }

    #[test]
    fn bad_rating_enters_tabu() {
        let mut ind = table_one_individual();
        let mut tabu = TabuList::default();
        let ratings = RatingMap::default().with(AttributeKey::Site, Rating::Bad);
        record_parent_ratings(&mut ind, &ratings, &mut tabu);
        assert_eq!(tabu.values(AttributeKey::Site), &[value("Rural village")]);
        assert_eq!(ind.ratings.get(AttributeKey::Site), Rating::Bad);
    }

    #[test]
    fn unrated_and_good_leave_tabu_alone() {
        let mut ind = table_one_individual();
        let mut tabu = TabuList::default();
        record_parent_ratings(&mut ind, &RatingMap::default(), &mut tabu);
        assert!(tabu.is_empty());
        let good = RatingMap::default().with(AttributeKey::Colors, Rating::Good);
        record_parent_ratings(&mut ind, &good, &mut tabu);
        assert!(tabu.is_empty());
        assert_eq!(ind.ratings.get(AttributeKey::Colors), Rating::Good);
    }

    #[test]
    fn unrated_does_not_erase_earlier_rating() {
        let mut ind = table_one_individual();
        let mut tabu = TabuList::default();
        record_parent_ratings(&mut ind, &RatingMap::default().with(AttributeKey::Site, Rating::Bad), &mut tabu);
        record_parent_ratings(&mut ind, &RatingMap::default(), &mut tabu);
        assert_eq!(ind.ratings.get(AttributeKey::Site), Rating::Bad);
        assert_eq!(tabu.len(AttributeKey::Site), 1);
    }

    #[test]
    fn tabu_deduplicates_normalized_and_survives_json() {
        let mut tabu = TabuList::default();
        assert!(tabu.insert(AttributeKey::Site, value("Rural village")));
        assert!(!tabu.insert(AttributeKey::Site, value("rural VILLAGE")));
        assert!(tabu.contains(AttributeKey::Site, "  Rural Village"));
        let json = serde_json::to_string(&tabu).unwrap();
        let back: TabuList = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tabu);
        assert!(back.contains(AttributeKey::Site, "rural village"));
    }

    #[test]
    fn session_validation() {
        let prompt = validate_initial_prompt("malaysian longhouse").unwrap();
        let mut session = Session::new(SessionId::new("s"), prompt, 1);
        session.generations.push(Generation {
            index: 0,
            members: (0..4)
                .map(|slot| Individual { id: IndividualId::positional(0, slot), ..table_one_individual() })
                .collect(),
            selection: None,
        });
        assert!(session.validate().is_ok());
        session.status = SessionStatus::Finished;
        assert!(session.validate().is_err());
        session.favourite = Some(IndividualId::positional(0, 2));
        assert!(session.validate().is_ok());
        session.generations[0].members.pop();
        assert!(matches!(session.validate(), Err(GenomeError::GenerationSize { .. })));
    }
}
