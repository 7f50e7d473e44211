//! Validation of provider payloads.
//!
//! Every JSON document a backend returns passes through one of these parsers
//! before it reaches the engine. A rejection makes the gateway retry.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::genome::{AttributeKey, AttributeMap, AttributeValue, POPULATION_SIZE};

#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    Malformed(String),
    Tabu { key: AttributeKey, value: String },
}

fn malformed<T>(msg: impl Into<String>) -> Result<T, Rejection> {
    Err(Rejection::Malformed(msg.into()))
}

fn field<'a>(v: &'a Value, name: &str) -> Result<&'a Value, Rejection> {
    v.as_object()
        .ok_or_else(|| Rejection::Malformed(format!("expected a JSON object, got {}", kind(v))))?
        .get(name)
        .ok_or_else(|| Rejection::Malformed(format!("missing field `{name}`")))
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn attribute_value(v: &Value, context: &str) -> Result<AttributeValue, Rejection> {
    let text = v
        .as_str()
        .ok_or_else(|| Rejection::Malformed(format!("{context}: expected a string, got {}", kind(v))))?;
    AttributeValue::new(text).map_err(|e| Rejection::Malformed(format!("{context}: {e}")))
}

/// Parses one key-complete attribute object. Missing or extra keys are rejected.
pub fn attribute_map(v: &Value) -> Result<AttributeMap, Rejection> {
    let obj = v
        .as_object()
        .ok_or_else(|| Rejection::Malformed(format!("expected an attribute object, got {}", kind(v))))?;
    for name in obj.keys() {
        if AttributeKey::parse(name).is_none() {
            return malformed(format!("unknown attribute `{name}`"));
        }
    }
    AttributeMap::try_from_fn(|key| match obj.get(key.as_str()) {
        Some(value) => attribute_value(value, key.as_str()),
        None => malformed(format!("missing attribute `{key}`")),
    })
}

/// `{"individuals": [<attribute object> x 4]}`
pub fn initial_attributes(v: &Value) -> Result<Vec<AttributeMap>, Rejection> {
    let list = field(v, "individuals")?
        .as_array()
        .ok_or_else(|| Rejection::Malformed("`individuals` must be an array".into()))?;
    if list.len() != POPULATION_SIZE {
        return malformed(format!("expected {POPULATION_SIZE} individuals, got {}", list.len()));
    }
    list.iter().map(attribute_map).collect()
}

/// `{"value": "..."}`
pub fn blend(v: &Value) -> Result<AttributeValue, Rejection> {
    attribute_value(field(v, "value")?, "value")
}

/// `{"similar": bool}`
pub fn similarity(v: &Value) -> Result<bool, Rejection> {
    field(v, "similar")?
        .as_bool()
        .ok_or_else(|| Rejection::Malformed("`similar` must be a boolean".into()))
}

/// `{"alternatives": {key: value}}` with exactly the requested keys, none of
/// which may equal a listed tabu value.
pub fn alternatives(
    v: &Value,
    requests: &BTreeMap<AttributeKey, Vec<AttributeValue>>,
) -> Result<BTreeMap<AttributeKey, AttributeValue>, Rejection> {
    let obj = field(v, "alternatives")?
        .as_object()
        .ok_or_else(|| Rejection::Malformed("`alternatives` must be an object".into()))?;
    let mut out = BTreeMap::new();
    for (name, value) in obj {
        let key = AttributeKey::parse(name)
            .ok_or_else(|| Rejection::Malformed(format!("unknown attribute `{name}`")))?;
        if !requests.contains_key(&key) {
            return malformed(format!("attribute `{name}` was not requested"));
        }
        out.insert(key, attribute_value(value, name)?);
    }
    for (key, tabu) in requests {
        let Some(value) = out.get(key) else {
            return malformed(format!("missing alternative for `{key}`"));
        };
        if tabu.iter().any(|t| t.matches(value.as_str())) {
            return Err(Rejection::Tabu { key: *key, value: value.to_string() });
        }
    }
    Ok(out)
}

/// `{"score": number}` with the number in `[0, 10]`.
pub fn difference_score(v: &Value) -> Result<f64, Rejection> {
    let score = field(v, "score")?
        .as_f64()
        .ok_or_else(|| Rejection::Malformed("`score` must be a number".into()))?;
    if !(0.0..=10.0).contains(&score) {
        return malformed(format!("score {score} outside [0, 10]"));
    }
    Ok(score)
}
